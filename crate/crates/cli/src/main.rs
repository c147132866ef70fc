fn main() {
    std::process::exit(rlcuts_cli::main_with(std::env::args_os()));
}
