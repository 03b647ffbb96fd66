//! Problem files (JSON, `"schema": 1`) and canonical JSON output.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exprdsl::Tag;
use crate::geometry::{BlockStructure, ConvexBody};
use crate::gnep::{parse_expr_list, GnepProblem, TagRule, TagTable, Tolerances};
use crate::losses::{LossBody, LossFlags, LossFunction};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: u32,
    pub name: String,
    pub players: Vec<PlayerSpec>,
    pub constraint: ConstraintSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<TagTableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerSpec {
    pub dim: usize,
    pub loss: LossSpec,
    #[serde(default)]
    pub flags: LossFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    /// Expression over the full profile `x1..xn`.
    Expr {
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gradient: Option<Vec<String>>,
    },
    Quadratic {
        q: Vec<Vec<f64>>,
        lin: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Hpolytope { a: Vec<Vec<f64>>, b: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Intersection(Vec<ConstraintSpec>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagRuleSpec {
    /// 1-based.
    pub player: usize,
    pub rivals: Vec<Tag>,
    pub value: Vec<String>,
    pub tag: Tag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagTableSpec {
    pub rules: Vec<TagRuleSpec>,
    #[serde(default)]
    pub irrational_constants: Vec<f64>,
}

impl ConstraintSpec {
    fn build(&self, n: usize) -> Result<ConvexBody> {
        Ok(match self {
            ConstraintSpec::Box { lower, upper } => ConvexBody::new_box(lower.clone(), upper.clone())?,
            ConstraintSpec::Hpolytope { a, b } => ConvexBody::new_hpolytope(a.clone(), b.clone(), n)?,
            ConstraintSpec::Ball { center, radius } => ConvexBody::new_ball(center.clone(), *radius)?,
            ConstraintSpec::Intersection(members) => {
                ConvexBody::new_intersection(members.iter().map(|m| m.build(n)).collect::<Result<_>>()?)?
            }
        })
    }

    fn from_body(body: &ConvexBody) -> Self {
        match body {
            ConvexBody::Box { lower, upper } => ConstraintSpec::Box {
                lower: lower.clone(),
                upper: upper.clone(),
            },
            ConvexBody::HPolytope { a, b, .. } => ConstraintSpec::Hpolytope {
                a: a.clone(),
                b: b.clone(),
            },
            ConvexBody::Ball { center, radius } => ConstraintSpec::Ball {
                center: center.clone(),
                radius: *radius,
            },
            ConvexBody::Intersection(m) => ConstraintSpec::Intersection(m.iter().map(Self::from_body).collect()),
        }
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if f.schema != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                f.schema
            )));
        }
        if f.players.is_empty() {
            return Err(Error::Schema("at least one player is required".into()));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_problem(&self) -> Result<GnepProblem> {
        let blocks = BlockStructure::new(self.players.iter().map(|p| p.dim).collect())?;
        let n = blocks.n();
        let losses = self
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let loss = match &p.loss {
                    LossSpec::Expr { source, gradient } => {
                        let mut l = LossFunction::expr(source, n)?;
                        if let Some(g) = gradient {
                            let refs: Vec<&str> = g.iter().map(String::as_str).collect();
                            l = l.with_gradient(&refs)?;
                        }
                        l
                    }
                    LossSpec::Quadratic { q, lin, c } => LossFunction::quadratic(q.clone(), lin.clone(), *c)
                        .map_err(|m| Error::model("losses", format!("player {}: {m}", i + 1)))?,
                };
                Ok(loss.with_flags(p.flags))
            })
            .collect::<Result<Vec<_>>>()?;
        let set = self.constraint.build(n)?;
        let mut problem = GnepProblem::new(&self.name, blocks, losses, set)?;
        if let Some(t) = &self.tolerances {
            problem = problem.with_tolerances(t.clone());
        }
        if let Some(t) = &self.tags {
            let rules = t
                .rules
                .iter()
                .map(|r| {
                    if r.player == 0 {
                        return Err(Error::Schema("tag rule players are 1-based".into()));
                    }
                    Ok(TagRule {
                        player: r.player - 1,
                        rivals: r.rivals.clone(),
                        value: parse_expr_list(&r.value, n)?,
                        tag: r.tag,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            problem = problem.with_tags(TagTable {
                rules,
                irrational_constants: t.irrational_constants.clone(),
            })?;
        }
        Ok(problem)
    }

    pub fn from_problem(problem: &GnepProblem) -> Self {
        let players = problem
            .losses
            .iter()
            .enumerate()
            .map(|(p, l)| PlayerSpec {
                dim: problem.blocks.dim(p),
                loss: match &l.body {
                    LossBody::Expr { source, .. } => LossSpec::Expr {
                        source: source.clone(),
                        gradient: l.gradient.as_ref().map(|g| g.iter().map(|(_, s)| s.clone()).collect()),
                    },
                    LossBody::Quadratic { q, lin, c } => LossSpec::Quadratic {
                        q: q.clone(),
                        lin: lin.clone(),
                        c: *c,
                    },
                },
                flags: l.flags,
            })
            .collect();
        ProblemFile {
            schema: SCHEMA_VERSION,
            name: problem.name.clone(),
            players,
            constraint: ConstraintSpec::from_body(&problem.set),
            tags: problem.tags.as_ref().map(|t| TagTableSpec {
                rules: t
                    .rules
                    .iter()
                    .map(|r| TagRuleSpec {
                        player: r.player + 1,
                        rivals: r.rivals.clone(),
                        value: r.value.iter().map(|(_, s)| s.clone()).collect(),
                        tag: r.tag,
                    })
                    .collect(),
                irrational_constants: t.irrational_constants.clone(),
            }),
            tolerances: Some(problem.tolerances.clone()),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        to_canonical(self)
    }
}

pub fn load_problem(path: &Path) -> Result<GnepProblem> {
    ProblemFile::load(path)?.to_problem()
}

/// `printf("%.17g")`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Pretty JSON with sorted keys and `%.17g` floats; ends with a newline.
pub fn to_canonical<T: Serialize + ?Sized>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("serializable");
    let mut out = String::new();
    write_value(&value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_g17(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            if a.iter()
                .all(|x| x.is_number() || x.is_string() || x.is_boolean() || x.is_null())
            {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, indent, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&m[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}
