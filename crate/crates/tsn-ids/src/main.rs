fn main() {
    tsn_ids::cli::init_logging();
    std::process::exit(tsn_ids::cli::run(std::env::args_os()));
}
