fn main() {
    std::process::exit(orbitgrad::cli::main())
}
