fn main() {
    std::process::exit(fairgrad::cli::main());
}
