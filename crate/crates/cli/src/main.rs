fn main() {
    std::process::exit(aoce_cli::main_with_args(std::env::args_os()));
}
