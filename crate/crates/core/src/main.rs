fn main() -> std::process::ExitCode {
    sheetreader::cli::main()
}
