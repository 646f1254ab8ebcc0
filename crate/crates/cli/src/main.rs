fn main() {
    std::process::exit(recontact_cli::run(std::env::args_os()));
}
