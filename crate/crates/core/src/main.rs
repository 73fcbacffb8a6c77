fn main() { std::process::exit(rasch_assess::cli::main_exit_code()); }
