fn main() {
    std::process::exit(tcs_core::harness::cli_main(std::env::args_os()));
}
