fn main() -> std::process::ExitCode {
    cutflux::cli::main()
}
