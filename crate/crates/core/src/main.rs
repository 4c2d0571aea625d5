fn main() {
    std::process::exit(frontlab::cli::run());
}
