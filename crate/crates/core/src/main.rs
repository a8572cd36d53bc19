fn main() {
    std::process::exit(affinelab::cli::main_with_args(std::env::args_os()));
}
