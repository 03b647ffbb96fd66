fn main() {
    gnep::cli::init_threads();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = gnep::cli::run(&args, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
