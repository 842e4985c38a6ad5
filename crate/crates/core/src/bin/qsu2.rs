fn main() -> std::process::ExitCode {
    qsu2::cli::main_from_args(std::env::args_os())
}
