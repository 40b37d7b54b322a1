fn main() -> std::process::ExitCode {
    hitl_mobo::cli::run(std::env::args_os())
}
