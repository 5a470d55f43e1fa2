fn main() -> std::process::ExitCode {
    diffscene::cli::main_with_args(std::env::args_os())
}
