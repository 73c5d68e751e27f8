fn main() {
    std::process::exit(anglican::cli::main());
}
