fn main() {
    std::process::exit(trisplit::cli::main_with_args(std::env::args_os()));
}
