fn main() {
    std::process::exit(spinlap_cli::main_with_args(std::env::args_os()));
}
