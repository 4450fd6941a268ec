fn main() {
    std::process::exit(radialface::cli::run());
}
