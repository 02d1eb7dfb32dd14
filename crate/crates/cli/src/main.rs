fn main() -> std::process::ExitCode {
    fractscan::cli::main()
}
