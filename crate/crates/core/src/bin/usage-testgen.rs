fn main() {
    std::process::exit(usage_testgen::cli::main());
}
