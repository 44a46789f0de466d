fn main() {
    std::process::exit(detfuse_cli::run_command(std::env::args_os()));
}
