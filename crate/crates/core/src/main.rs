fn main() {
    std::process::exit(ci_pcorr::cli::main());
}
