fn main() {
    std::process::exit(cra_cli::main_with_env());
}
