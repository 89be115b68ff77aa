fn main() {
    std::process::exit(learnpa::cli::main_with_args(std::env::args_os()));
}
