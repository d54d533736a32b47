//! Train a linear SVM on synthetic data, save it and reload it.

use fpcert::data_io::{gen_blobs, load_model, save_model, Model};
use fpcert::train::{linear_accuracy, train_linear_svm, TrainConfig};

fn main() -> fpcert::Result<()> {
    let data = gen_blobs(300, &[vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 0.0]], 0.6, 9)?.binary_pair(0, 1)?;
    let (m, log) = train_linear_svm(&data, &TrainConfig::default())?;
    for e in &log.0 {
        println!("epoch {:>2}  objective {:.5}  accuracy {:.3}", e.epoch, e.objective, e.accuracy);
    }
    println!("w = {:?}, b = {}", m.w, m.b);

    let dir = tempfile::tempdir().map_err(|e| fpcert::Error::Io { path: "tmp".into(), message: e.to_string() })?;
    let path = dir.path().join("svm.json");
    save_model(&path, &Model::Linear(m.clone()), &Default::default())?;
    let loaded = load_model(&path)?;
    assert_eq!(loaded.model, Model::Linear(m.clone()));
    println!("reloaded bit-exact; accuracy {}", linear_accuracy(&m, &data)?);
    Ok(())
}
