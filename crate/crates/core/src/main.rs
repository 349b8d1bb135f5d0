fn main() {
    std::process::exit(lobflow::cli::main_with_args(std::env::args_os()));
}
