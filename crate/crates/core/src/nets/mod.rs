//! Learned components: recurrent motion encoders, the point-voxel scene
//! encoder, the contact-map predictor, the global-translation predictor, and
//! the autoregressive local-pose decoder.
//!
//! Forward passes are written once against the tape; inference binds the
//! parameters as constants and reads values, training binds them as
//! differentiable leaves.

pub mod gru;
pub mod mlp;
pub mod pvcnn;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::autodiff::{Array, BoundParams, Params, Tape, Tensor};
use crate::dct;
use crate::error::{Error, Result};
use crate::geom::{
    contact_sequence, extract_contact_points_range, ContactMap, ContactPointSet, MotionSequence,
    SceneCloud,
};
pub use gru::GruSpec;
pub use mlp::MlpSpec;
pub use pvcnn::{PvGeometry, PvSpec};

/// Architecture hyperparameters of the contact prediction network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactArch {
    pub joints: usize,
    /// Kept DCT coefficients per (joint, scene point) channel.
    pub dct_l: usize,
    pub hidden: usize,
    pub voxel_r: usize,
}

impl ContactArch {
    pub fn channels(&self) -> usize {
        self.joints * self.dct_l
    }

    fn encoder(&self) -> GruSpec {
        GruSpec {
            input: self.joints * 3,
            hidden: self.hidden,
        }
    }

    fn pv(&self) -> PvSpec {
        PvSpec {
            channels: self.channels(),
            hidden: self.hidden,
            resolution: self.voxel_r,
        }
    }
}

/// Architecture hyperparameters of the motion forecasting network. Input
/// widths depend on the history/horizon lengths, so both are fixed here.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionArch {
    pub joints: usize,
    pub hidden: usize,
    pub past: usize,
    pub future: usize,
    /// Cap on root-trajectory DCT coefficients (effective: min(cap, P+T)).
    pub root_dct_l: usize,
}

impl MotionArch {
    pub fn root_coeffs(&self) -> usize {
        self.root_dct_l.min(self.past + self.future)
    }

    fn encoder(&self) -> GruSpec {
        GruSpec {
            input: self.joints * 3,
            hidden: self.hidden,
        }
    }

    fn root_mlp(&self) -> MlpSpec {
        let input = self.hidden + self.future * self.joints * 4 + 3 * self.root_coeffs();
        MlpSpec::with_depth(input, self.hidden, 3 * self.root_coeffs(), 6)
    }

    fn decoder(&self) -> GruSpec {
        GruSpec {
            input: (self.joints - 1) * 3 + 3 + self.joints * 4 + self.hidden,
            hidden: self.hidden,
        }
    }
}

/// Contact prediction network: motion GRU encoder plus point-voxel encoder.
#[derive(Clone, Debug)]
pub struct ContactNet {
    pub arch: ContactArch,
    pub params: Params,
}

impl ContactNet {
    pub fn new(arch: ContactArch, seed: u64) -> ContactNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        arch.encoder().init(&mut params, "enc", &mut rng);
        arch.pv().init(&mut params, "pv", &mut rng);
        ContactNet { arch, params }
    }

    /// Inference: predicted contact map volume `[P+T, J, N]`.
    pub fn predict_maps(
        &self,
        scene: &SceneCloud,
        past_maps: &ContactMap,
        observed: &MotionSequence,
        future: usize,
    ) -> Result<Array> {
        let inputs = ContactInputs::prepare(scene, past_maps, observed, future, &self.arch)?;
        let tape = Tape::new();
        let bound = BoundParams::bind_const(&tape, &self.params);
        Ok(contact_forward(&tape, &bound, &self.arch, &inputs)?.value())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.params.save(path)?;
        let meta = format!(
            "kind contact\njoints {}\ndct_l {}\nhidden {}\nvoxel_r {}\n",
            self.arch.joints, self.arch.dct_l, self.arch.hidden, self.arch.voxel_r
        );
        std::fs::write(meta_path(path), meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ContactNet> {
        let params = Params::load(path)?;
        let meta = read_meta(path)?;
        if meta.kind != "contact" {
            return Err(Error::parse(
                meta_path(path).display().to_string(),
                format!("expected a contact checkpoint, found kind {:?}", meta.kind),
            ));
        }
        let arch = ContactArch {
            joints: meta.get("joints")?,
            dct_l: meta.get("dct_l")?,
            hidden: meta.get("hidden")?,
            voxel_r: meta.get("voxel_r")?,
        };
        Ok(ContactNet { arch, params })
    }
}

/// Motion forecasting network: its own GRU encoder, a root-trajectory MLP,
/// and an autoregressive GRU decoder for local poses.
#[derive(Clone, Debug)]
pub struct MotionNet {
    pub arch: MotionArch,
    pub params: Params,
}

impl MotionNet {
    pub fn new(arch: MotionArch, seed: u64) -> MotionNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        arch.encoder().init(&mut params, "enc", &mut rng);
        arch.root_mlp().init(&mut params, "root", &mut rng);
        arch.decoder().init(&mut params, "dec", &mut rng);
        params.insert(
            "dec.h0.w",
            crate::autodiff::glorot_uniform(arch.hidden, arch.hidden, &mut rng),
        );
        params.insert("dec.h0.b", Array::zeros(&[1, arch.hidden]));
        params.insert(
            "dec.out.w",
            crate::autodiff::glorot_uniform(arch.hidden, (arch.joints - 1) * 3, &mut rng),
        );
        params.insert("dec.out.b", Array::zeros(&[1, (arch.joints - 1) * 3]));
        MotionNet { arch, params }
    }

    /// Inference: future roots `[T, 3]` and local poses `[T, J-1, 3]`.
    pub fn predict(
        &self,
        observed: &MotionSequence,
        contacts: &ContactPointSet,
    ) -> Result<(Array, Array)> {
        let inputs = MotionInputs::prepare(observed, contacts, &self.arch)?;
        let tape = Tape::new();
        let bound = BoundParams::bind_const(&tape, &self.params);
        let (roots, locals) = motion_forward(&tape, &bound, &self.arch, &inputs)?;
        Ok((roots.value(), locals.value()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.params.save(path)?;
        let meta = format!(
            "kind motion\njoints {}\nhidden {}\npast {}\nfuture {}\nroot_dct_l {}\n",
            self.arch.joints,
            self.arch.hidden,
            self.arch.past,
            self.arch.future,
            self.arch.root_dct_l
        );
        std::fs::write(meta_path(path), meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MotionNet> {
        let params = Params::load(path)?;
        let meta = read_meta(path)?;
        if meta.kind != "motion" {
            return Err(Error::parse(
                meta_path(path).display().to_string(),
                format!("expected a motion checkpoint, found kind {:?}", meta.kind),
            ));
        }
        let arch = MotionArch {
            joints: meta.get("joints")?,
            hidden: meta.get("hidden")?,
            past: meta.get("past")?,
            future: meta.get("future")?,
            root_dct_l: meta.get("root_dct_l")?,
        };
        Ok(MotionNet { arch, params })
    }
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta");
    std::path::PathBuf::from(s)
}

struct Meta {
    kind: String,
    fields: std::collections::BTreeMap<String, String>,
}

impl Meta {
    fn get(&self, key: &str) -> Result<usize> {
        self.fields
            .get(key)
            .ok_or_else(|| Error::parse("checkpoint meta", format!("missing field {key}")))?
            .parse()
            .map_err(|_| Error::parse("checkpoint meta", format!("field {key} is not an integer")))
    }
}

fn read_meta(ckpt: &Path) -> Result<Meta> {
    let path = meta_path(ckpt);
    let text = std::fs::read_to_string(&path)?;
    let mut kind = String::new();
    let mut fields = std::collections::BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(' ').ok_or_else(|| {
            Error::parse(
                format!("{}:{}", path.display(), ln + 1),
                "expected `key value`",
            )
        })?;
        if key == "kind" {
            kind = value.trim().to_string();
        } else {
            fields.insert(key.to_string(), value.trim().to_string());
        }
    }
    Ok(Meta { kind, fields })
}

/// Precomputed inputs for one contact-prediction forward pass.
pub struct ContactInputs {
    pub geometry: PvGeometry,
    /// Observed motion, `[P, J*3]`.
    pub x_flat: Array,
    /// DCT coefficients of the replicate-padded past maps, `[L, J*N]`.
    pub h_coeffs: Array,
    /// The same coefficients as per-point features, `[N, J*L]`, joint-major.
    pub features: Array,
    pub past: usize,
    pub future: usize,
    pub num_points: usize,
}

impl ContactInputs {
    pub fn prepare(
        scene: &SceneCloud,
        past_maps: &ContactMap,
        observed: &MotionSequence,
        future: usize,
        arch: &ContactArch,
    ) -> Result<ContactInputs> {
        let p = past_maps.num_frames();
        let (j, n) = {
            let s = past_maps.values().shape();
            (s[1], s[2])
        };
        if j != arch.joints {
            return Err(Error::InvalidInput(format!(
                "contact maps cover {j} joints but the network expects {}",
                arch.joints
            )));
        }
        if n != scene.len() {
            return Err(Error::shape(
                "contact_inputs",
                past_maps.values().shape(),
                &[p, j, scene.len()],
            ));
        }
        if observed.num_frames() != p || observed.num_joints() != j {
            return Err(Error::InvalidInput(format!(
                "observed motion is {}x{} but maps are {}x{}",
                observed.num_frames(),
                observed.num_joints(),
                p,
                j
            )));
        }
        let l = arch.dct_l;
        if l > p + future {
            return Err(Error::InvalidParameter(format!(
                "dct_l {} exceeds padded length {}",
                l,
                p + future
            )));
        }
        let seq = past_maps.values().reshape(&[p, j * n])?;
        let h_coeffs = dct::encode_padded(&seq, future, l)?.coeffs;
        let features = h_coeffs
            .reshape(&[l, j, n])?
            .permute(&[2, 1, 0])?
            .reshape(&[n, j * l])?;
        Ok(ContactInputs {
            geometry: PvGeometry::new(scene, arch.voxel_r)?,
            x_flat: observed.flattened(),
            h_coeffs,
            features,
            past: p,
            future,
            num_points: n,
        })
    }
}

/// Predicted contact-map volume `[P+T, J, N]` on the tape:
/// IDCT of (history coefficients + learned residual).
pub fn contact_forward(
    tape: &Tape,
    bound: &BoundParams,
    arch: &ContactArch,
    inputs: &ContactInputs,
) -> Result<Tensor> {
    let (p, t, n) = (inputs.past, inputs.future, inputs.num_points);
    let (j, l) = (arch.joints, arch.dct_l);
    let x = tape.constant(inputs.x_flat.clone());
    let embedding = arch.encoder().scan(tape, bound, "enc", &x)?;
    let features = tape.constant(inputs.features.clone());
    let residual = arch
        .pv()
        .encode(tape, bound, "pv", &inputs.geometry, &features, &embedding)?;
    let residual_coeffs = residual
        .reshape(&[n, j, l])?
        .permute(&[2, 1, 0])?
        .reshape(&[l, j * n])?;
    let coeffs = tape.constant(inputs.h_coeffs.clone()).add(&residual_coeffs)?;
    let basis_t = tape.constant(dct::truncated_basis(p + t, l)?.transpose()?);
    basis_t.matmul(&coeffs)?.reshape(&[p + t, j, n])
}

/// Precomputed inputs for one motion-forecasting forward pass.
pub struct MotionInputs {
    /// Observed motion, `[P, J*3]`.
    pub x_flat: Array,
    /// Last observed local pose, `[1, (J-1)*3]`.
    pub last_local: Array,
    /// DCT coefficients of the replicate-padded observed roots, `[Lr, 3]`.
    pub root_coeffs: Array,
    /// Conditioning contact points, `[T, J, 4]`.
    pub contacts: Array,
}

impl MotionInputs {
    pub fn prepare(
        observed: &MotionSequence,
        contacts: &ContactPointSet,
        arch: &MotionArch,
    ) -> Result<MotionInputs> {
        if observed.num_frames() != arch.past || observed.num_joints() != arch.joints {
            return Err(Error::InvalidInput(format!(
                "observed motion is {}x{} but the network expects {}x{}",
                observed.num_frames(),
                observed.num_joints(),
                arch.past,
                arch.joints
            )));
        }
        if contacts.num_frames() != arch.future || contacts.num_joints() != arch.joints {
            return Err(Error::InvalidInput(format!(
                "contact points are {}x{} but the network expects {}x{}",
                contacts.num_frames(),
                contacts.num_joints(),
                arch.future,
                arch.joints
            )));
        }
        let locals = observed.local_poses();
        let last_local = locals
            .slice(0, arch.past - 1, 1)?
            .reshape(&[1, (arch.joints - 1) * 3])?;
        let root_coeffs =
            dct::encode_padded(&observed.roots(), arch.future, arch.root_coeffs())?.coeffs;
        Ok(MotionInputs {
            x_flat: observed.flattened(),
            last_local,
            root_coeffs,
            contacts: contacts.entries().clone(),
        })
    }
}

/// Future roots `[T, 3]` and local poses `[T, J-1, 3]` on the tape.
///
/// The root branch predicts residual DCT coefficients of the full padded
/// root trajectory; the local decoder runs autoregressively from the last
/// observed local pose, with its hidden state initialized from the motion
/// embedding through a learned linear map.
pub fn motion_forward(
    tape: &Tape,
    bound: &BoundParams,
    arch: &MotionArch,
    inputs: &MotionInputs,
) -> Result<(Tensor, Tensor)> {
    let (p, t, j) = (arch.past, arch.future, arch.joints);
    let lr = arch.root_coeffs();

    let x = tape.constant(inputs.x_flat.clone());
    let embedding = arch.encoder().scan(tape, bound, "enc", &x)?;

    // global translations
    let q_flat = tape.constant(inputs.contacts.reshape(&[1, t * j * 4])?);
    let root_hist = tape.constant(inputs.root_coeffs.reshape(&[1, lr * 3])?);
    let mlp_in = Tensor::concat(&[&embedding, &q_flat, &root_hist], 1)?;
    let residual = arch.root_mlp().forward(bound, "root", &mlp_in)?;
    let coeffs = tape
        .constant(inputs.root_coeffs.clone())
        .add(&residual.reshape(&[lr, 3])?)?;
    let basis_t = tape.constant(dct::truncated_basis(p + t, lr)?.transpose()?);
    let roots_full = basis_t.matmul(&coeffs)?;
    let roots = roots_full.slice(0, p, t)?;

    // local poses, autoregressive
    let mut hidden = embedding
        .matmul(bound.get("dec.h0.w"))?
        .add(bound.get("dec.h0.b"))?;
    let mut prev = tape.constant(inputs.last_local.clone());
    let decoder = arch.decoder();
    let mut steps = Vec::with_capacity(t);
    for ti in 0..t {
        let root_t = roots.slice(0, ti, 1)?;
        let q_t = tape.constant(inputs.contacts.slice(0, ti, 1)?.reshape(&[1, j * 4])?);
        let step_in = Tensor::concat(&[&prev, &root_t, &q_t, &embedding], 1)?;
        hidden = decoder.cell(bound, "dec", &step_in, &hidden)?;
        let delta = hidden
            .matmul(bound.get("dec.out.w"))?
            .add(bound.get("dec.out.b"))?;
        prev = prev.add(&delta)?;
        steps.push(prev.clone());
    }
    let step_refs: Vec<&Tensor> = steps.iter().collect();
    let locals = Tensor::concat(&step_refs, 0)?.reshape(&[t, j - 1, 3])?;
    Ok((roots, locals))
}

/// Global joints `[T, J, 3]` from predicted roots and root-relative locals,
/// keeping the original joint order.
pub fn assemble_global_joints(
    tape: &Tape,
    roots: &Tensor,
    locals: &Tensor,
    root_index: usize,
) -> Result<Tensor> {
    let shape = locals.shape();
    let (t, jm1) = (shape[0], shape[1]);
    let zeros = tape.constant(Array::zeros(&[t, 1, 3]));
    let mut parts: Vec<Tensor> = Vec::new();
    if root_index > 0 {
        parts.push(locals.slice(1, 0, root_index)?);
    }
    parts.push(zeros);
    if jm1 > root_index {
        parts.push(locals.slice(1, root_index, jm1 - root_index)?);
    }
    let refs: Vec<&Tensor> = parts.iter().collect();
    let offsets = Tensor::concat(&refs, 1)?;
    offsets.add(&roots.reshape(&[t, 1, 3])?)
}

/// Full inference output.
pub struct Forecast {
    /// Predicted future motion over T frames (global joints).
    pub motion: MotionSequence,
    /// Contact points extracted from the predicted maps, `[T, J, 4]`.
    pub contact_points: ContactPointSet,
    /// Predicted contact-map volume `[P+T, J, N]`.
    pub predicted_maps: Array,
}

/// End-to-end pipeline: predict contact maps, extract future contact points,
/// forecast global translations, then local poses, and assemble.
pub fn forecast(
    scene: &SceneCloud,
    observed: &MotionSequence,
    contact_net: &ContactNet,
    motion_net: &MotionNet,
    sigma: f64,
    epsilon: f64,
) -> Result<Forecast> {
    let p = observed.num_frames();
    let t = motion_net.arch.future;
    let past_maps = contact_sequence(observed, scene, sigma)?;
    let predicted_maps = contact_net.predict_maps(scene, &past_maps, observed, t)?;
    let contact_points = extract_contact_points_range(&predicted_maps, scene, epsilon, p, t)?;
    let (roots, locals) = motion_net.predict(observed, &contact_points)?;
    let motion = motion_from_parts(&roots, &locals, observed)?;
    Ok(Forecast {
        motion,
        contact_points,
        predicted_maps,
    })
}

/// Build a global-joint motion from predicted roots and local offsets.
pub fn motion_from_parts(
    roots: &Array,
    locals: &Array,
    observed: &MotionSequence,
) -> Result<MotionSequence> {
    let tape = Tape::new();
    let roots_t = tape.constant(roots.clone());
    let locals_t = tape.constant(locals.clone());
    let globals =
        assemble_global_joints(&tape, &roots_t, &locals_t, observed.root_index())?.value();
    let t = globals.shape()[0];
    let j = globals.shape()[1];
    let mut frames = Vec::with_capacity(t);
    for ti in 0..t {
        let mut frame = Vec::with_capacity(j);
        for ji in 0..j {
            frame.push([
                globals.at(&[ti, ji, 0]),
                globals.at(&[ti, ji, 1]),
                globals.at(&[ti, ji, 2]),
            ]);
        }
        frames.push(frame);
    }
    MotionSequence::new(frames, observed.fps(), observed.root_index())
}
