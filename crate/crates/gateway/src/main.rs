fn main() {
    std::process::exit(psytest_gateway::cli::main_with_args(std::env::args_os()));
}
