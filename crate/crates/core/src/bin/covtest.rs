fn main() {
    std::process::exit(covtest::cli::main());
}
