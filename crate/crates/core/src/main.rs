fn main() {
    std::process::exit(magdecay::cli::main());
}
