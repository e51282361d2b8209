fn main() {
    std::process::exit(wml_core::cli::main_with_args(std::env::args_os()));
}
