fn main() {
    std::process::exit(symflow::cli::main());
}
