fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(adaspec_cli::execute(&argv));
}
