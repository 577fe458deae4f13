fn main() -> std::process::ExitCode {
    damm::cli::main()
}
