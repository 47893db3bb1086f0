fn main() {
    std::process::exit(kanae::cli::main_with_args(std::env::args().collect()));
}
