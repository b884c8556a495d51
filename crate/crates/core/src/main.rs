fn main() {
    std::process::exit(fvkernel::cli::main());
}
