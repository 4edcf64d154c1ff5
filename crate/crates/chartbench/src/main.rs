fn main() -> std::process::ExitCode {
    let code = chartbench::cli::main_with(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::ExitCode::from(code)
}
