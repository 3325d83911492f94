fn main() {
    std::process::exit(lpkdv::cli::main_with_args(std::env::args_os()));
}
