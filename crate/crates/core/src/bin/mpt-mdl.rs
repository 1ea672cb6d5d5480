fn main() { std::process::exit(mpt_mdl::cli::main()) }
