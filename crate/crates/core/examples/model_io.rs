//! Generate, save and reload a network in the text model format.

use pnverify::model_io::{generate_random_network, load_model, save_model, ModelFile, NetworkDims, NetworkKind};

fn main() -> pnverify::Result<()> {
    let dims = NetworkDims {
        degree: 2,
        input: 2,
        hidden: 2,
        output: 2,
    };
    let net = generate_random_network(NetworkKind::Ncp, dims, 0, 1.0)?;
    let file = ModelFile::new(net.clone()).with_meta("seed", 0);
    print!("{}", file.to_text());

    let path = std::env::temp_dir().join("pnverify-example.pn");
    save_model(&file, &path)?;
    let back = load_model(&path)?;
    println!("reloaded from {} identical: {}", path.display(), back == file);
    std::fs::remove_file(path)?;
    Ok(())
}
