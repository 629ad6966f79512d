use std::process::Command;

fn main() {
    println!("cargo:rerun-if-changed=build.rs");
    let describe = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    if let Some(d) = describe {
        println!(
            "cargo:rustc-env=HJPROX_GIT_DESCRIBE=v{}-g{}",
            env!("CARGO_PKG_VERSION"),
            d
        );
    }
}
