fn main() -> std::process::ExitCode {
    rotated_gaussian::cli::main()
}
