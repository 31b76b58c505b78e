fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(periodwave::cli::run(&argv));
}
