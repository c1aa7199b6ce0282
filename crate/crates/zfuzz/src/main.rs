fn main() {
    std::process::exit(zfuzz::cli::main());
}
