fn main() {
    std::process::exit(lorentz_dirac_cli::run(std::env::args_os()));
}
