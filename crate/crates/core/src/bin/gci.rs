fn main() {
    std::process::exit(geodesic_causal::cli::run_from(std::env::args_os()));
}
