fn main() { std::process::exit(remote_estimation::cli::main_with_args(std::env::args_os())) }
