fn main() {
    std::process::exit(snls::cli::main_with_args(std::env::args_os()));
}
