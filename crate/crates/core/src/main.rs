fn main() {
    std::process::exit(spdchar::cli::main_with_args(std::env::args_os()));
}
