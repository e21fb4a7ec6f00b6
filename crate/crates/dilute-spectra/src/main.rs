fn main() {
    std::process::exit(dilute_spectra::harness::cli::cli(std::env::args_os()));
}
