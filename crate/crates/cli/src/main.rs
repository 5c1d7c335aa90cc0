fn main() {
    let mut stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = cirbench_cli::run(std::env::args_os(), &mut stdout, &mut stderr.lock());
    std::process::exit(code);
}
