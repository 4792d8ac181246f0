fn main() {
    std::process::exit(qvlab::cli::main());
}
