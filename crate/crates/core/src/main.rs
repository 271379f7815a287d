fn main() {
    std::process::exit(riskcot::cli::run(std::env::args_os()));
}
