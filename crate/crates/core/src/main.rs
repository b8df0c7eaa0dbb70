fn main() {
    std::process::exit(coevolve::cli::run(std::env::args_os()));
}
