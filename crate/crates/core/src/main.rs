fn main() {
    std::process::exit(nvsgraph::cli::main());
}
