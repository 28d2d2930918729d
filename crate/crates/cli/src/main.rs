fn main() -> std::process::ExitCode {
    mbci_cli::main_from(std::env::args_os())
}
