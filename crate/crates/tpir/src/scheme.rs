//! The retrieval protocol: answer schedule, private query generation,
//! server-side answering, and client-side decoding.
//!
//! The construction works in two parts. Mixing-expanding: the desired
//! record is multiplied by a private uniform invertible matrix; every other
//! record is reduced to `ell` independent symbols and re-expanded through
//! public systematic MDS codes. Combining: a fixed, theta-independent
//! schedule assigns Lambda-type k-sums to servers, with the first T servers
//! carrying alpha_k sums per type and the rest beta_k. Decoding recovers
//! the parity of each undesired codeword from its information part and
//! cancels it out of the mixed symbols.
//!
//! Record, server, and coordinate indices are 0-based throughout.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};
use crate::mds::SystematicMdsCode;
use crate::params::SchemeParams;

/// All subsets of {0..m-1} of size k, in lexicographic order.
pub fn subsets_of_size(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut vec![], &mut out);
    out
}

/// One answer symbol: server, record subset, repetition index, and the
/// coordinate of each participating record consumed by this sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub server: usize,
    pub lam: Vec<usize>,
    pub h: usize,
    /// aligned with `lam`: symbol_index[i] is the coordinate of U_{lam[i]}
    pub symbol_index: Vec<usize>,
}

impl Slot {
    pub fn coord_of(&self, record: usize) -> Option<usize> {
        self.lam
            .iter()
            .position(|&r| r == record)
            .map(|i| self.symbol_index[i])
    }
}

/// The theta-independent ordered list of answer slots. Slots are ordered by
/// k ascending, then Lambda lexicographic, then server, then repetition;
/// per-record coordinates are drawn successively in that order.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub params: SchemeParams,
    pub slots: Vec<Slot>,
    /// slot ids per server, in slot order
    pub per_server: Vec<Vec<usize>>,
}

pub fn build_schedule(params: &SchemeParams) -> Result<Schedule> {
    let m = params.config.records;
    let big_n = params.config.servers;
    let big_t = params.config.collusion;
    let l = params.sub_packetization;

    let mut slots = Vec::with_capacity(params.download);
    let mut per_server = vec![vec![]; big_n];
    let mut counters = vec![0usize; m];
    for k in 1..=m {
        for lam in subsets_of_size(m, k) {
            for server in 0..big_n {
                let reps = if server < big_t {
                    params.alpha[k - 1]
                } else {
                    params.beta[k - 1]
                };
                for h in 0..reps {
                    let symbol_index: Vec<usize> = lam
                        .iter()
                        .map(|&nu| {
                            let s = counters[nu];
                            counters[nu] += 1;
                            s
                        })
                        .collect();
                    per_server[server].push(slots.len());
                    slots.push(Slot {
                        server,
                        lam: lam.clone(),
                        h,
                        symbol_index,
                    });
                }
            }
        }
    }
    if slots.len() != params.download {
        return Err(Error::Internal("slot count != D".into()));
    }
    if counters.iter().any(|&c| c != l) {
        return Err(Error::Internal("per-record symbol usage != L".into()));
    }
    for (j, ids) in per_server.iter().enumerate() {
        if ids.len() != params.gamma(j) {
            return Err(Error::Internal("per-server slot count != gamma".into()));
        }
    }
    Ok(Schedule {
        params: params.clone(),
        slots,
        per_server,
    })
}

/// The MDS codes of the expanding step: for each k in 1..M, a systematic
/// code of dimension T*alpha_k + (N-T)*beta_k and rate T/N.
pub struct CodeSet {
    codes: Vec<SystematicMdsCode>,
}

impl CodeSet {
    pub fn new(params: &SchemeParams, field: PrimeField) -> Result<Self> {
        let m = params.config.records;
        let mut codes = Vec::with_capacity(m - 1);
        for k in 1..m {
            let dim = params.sum_count(k);
            let len = dim + params.sum_count(k + 1);
            codes.push(SystematicMdsCode::new(len, dim, field)?);
        }
        Ok(CodeSet { codes })
    }

    /// Code for Lambda-blocks of size k (1-based, k < M).
    pub fn code(&self, k: usize) -> &SystematicMdsCode {
        &self.codes[k - 1]
    }
}

/// One MDS codeword of an undesired record: which coordinates of U_i carry
/// the information part (slots of type Lambda) and the parity part (slots of
/// type Lambda + theta), and where its columns sit inside the mixer.
#[derive(Debug, Clone)]
struct Block {
    lam: Vec<usize>,
    col_offset: usize,
    info_coords: Vec<usize>,
    parity_coords: Vec<usize>,
}

/// Per-record coordinate layout induced by the schedule for a given theta.
struct Layout {
    /// blocks[i] = canonical-order blocks of record i; empty at i = theta
    blocks: Vec<Vec<Block>>,
}

fn build_layout(schedule: &Schedule, theta: usize) -> Result<Layout> {
    let p = &schedule.params;
    let m = p.config.records;
    if theta >= m {
        return Err(Error::Index(format!("theta = {theta} out of range")));
    }
    let mut blocks: Vec<Vec<Block>> = vec![vec![]; m];
    let mut offsets = vec![0usize; m];
    for slot in &schedule.slots {
        let desired = slot.lam.contains(&theta);
        for (pos, &nu) in slot.lam.iter().enumerate() {
            if nu == theta {
                continue;
            }
            let coord = slot.symbol_index[pos];
            let key: Vec<usize> = if desired {
                slot.lam.iter().copied().filter(|&r| r != theta).collect()
            } else {
                slot.lam.clone()
            };
            let recs = &mut blocks[nu];
            let idx = match recs.iter().position(|b| b.lam == key) {
                Some(i) => i,
                None => {
                    // info slots of a block always precede its parity slots
                    // (they have strictly smaller k), so blocks are created
                    // in canonical order and offsets advance consistently.
                    if desired {
                        return Err(Error::Internal(
                            "parity slot before information slot".into(),
                        ));
                    }
                    let dim = p.sum_count(key.len());
                    recs.push(Block {
                        lam: key.clone(),
                        col_offset: offsets[nu],
                        info_coords: vec![],
                        parity_coords: vec![],
                    });
                    offsets[nu] += dim;
                    recs.len() - 1
                }
            };
            if desired {
                recs[idx].parity_coords.push(coord);
            } else {
                recs[idx].info_coords.push(coord);
            }
        }
    }
    for (i, recs) in blocks.iter().enumerate() {
        if i == theta {
            continue;
        }
        if offsets[i] != p.mixing_width {
            return Err(Error::Internal("mixer width != ell".into()));
        }
        for b in recs {
            let k = b.lam.len();
            if b.info_coords.len() != p.sum_count(k)
                || b.parity_coords.len() != p.sum_count(k + 1)
            {
                return Err(Error::Internal("block coordinate counts mismatch".into()));
            }
        }
    }
    Ok(Layout { blocks })
}

/// The user's private randomness: the invertible mixer of the desired record
/// and a full-rank L x ell mixer per undesired record.
#[derive(Debug, Clone)]
pub struct MixState {
    pub theta: usize,
    pub s_theta: FieldMatrix,
    /// indexed by record; None exactly at theta
    pub mixers: Vec<Option<FieldMatrix>>,
}

/// Per-server stacked query matrices plus the private decoder state.
#[derive(Debug, Clone)]
pub struct QuerySet {
    pub theta: usize,
    /// per server: (M*L) x gamma_j, row blocks ordered by record index
    pub matrices: Vec<FieldMatrix>,
    pub mix: MixState,
}

impl QuerySet {
    /// Stack the row blocks of `records` and the columns of `servers` into
    /// one matrix, for rank audits.
    pub fn stacked_block(&self, records: &[usize], servers: &[usize]) -> Result<FieldMatrix> {
        let field = self.matrices[0].field();
        let l = self.matrices[0].rows() / self.mix.mixers.len();
        let rows = records.len() * l;
        let cols: usize = servers.iter().map(|&j| self.matrices[j].cols()).sum();
        let mut out = FieldMatrix::zeros(field, rows, cols);
        let mut col0 = 0;
        for &j in servers {
            let mat = &self.matrices[j];
            for c in 0..mat.cols() {
                for (bi, &rec) in records.iter().enumerate() {
                    for r in 0..l {
                        out[(bi * l + r, col0 + c)] = mat[(rec * l + r, c)];
                    }
                }
            }
            col0 += mat.cols();
        }
        Ok(out)
    }

    /// Canonical serialization of what a server coalition receives:
    /// matrices in server-index order, entries row-major.
    pub fn coalition_view(&self, servers: &[usize]) -> Vec<u64> {
        let mut sorted = servers.to_vec();
        sorted.sort_unstable();
        let mut out = vec![];
        for &j in &sorted {
            let m = &self.matrices[j];
            out.push(m.rows() as u64);
            out.push(m.cols() as u64);
            out.extend_from_slice(m.entries());
        }
        out
    }
}

/// Sample fresh user randomness for retrieving `theta`.
pub fn sample_mix_state<R: Rng>(
    params: &SchemeParams,
    field: PrimeField,
    theta: usize,
    rng: &mut R,
) -> Result<MixState> {
    let m = params.config.records;
    if theta >= m {
        return Err(Error::Index(format!("theta = {theta} out of range")));
    }
    let l = params.sub_packetization;
    let s_theta = FieldMatrix::sample_full_rank(field, l, l, rng)?;
    let mut mixers = Vec::with_capacity(m);
    for i in 0..m {
        if i == theta {
            mixers.push(None);
        } else {
            mixers.push(Some(FieldMatrix::sample_full_rank(
                field,
                l,
                params.mixing_width,
                rng,
            )?));
        }
    }
    Ok(MixState {
        theta,
        s_theta,
        mixers,
    })
}

/// Deterministically assemble the per-server query matrices from a given
/// mix state. Split out from [`generate_queries`] so verification can
/// enumerate the full randomness space.
pub fn queries_from_mix(
    schedule: &Schedule,
    field: PrimeField,
    mix: MixState,
) -> Result<QuerySet> {
    let p = &schedule.params;
    let m = p.config.records;
    let l = p.sub_packetization;
    let theta = mix.theta;
    let layout = build_layout(schedule, theta)?;
    let codes = CodeSet::new(p, field)?;

    // column of W_nu producing u_{nu,s}, for every record and coordinate
    let mut col_of: Vec<Vec<Vec<u64>>> = vec![vec![vec![]; l]; m];
    for s in 0..l {
        col_of[theta][s] = mix.s_theta.col(s);
    }
    for i in 0..m {
        if i == theta {
            continue;
        }
        let mixer = mix.mixers[i]
            .as_ref()
            .ok_or_else(|| Error::Internal("missing mixer".into()))?;
        if mixer.rows() != l || mixer.cols() != p.mixing_width {
            return Err(Error::Shape("mixer has wrong shape".into()));
        }
        for b in &layout.blocks[i] {
            let k = b.lam.len();
            let parity = codes.code(k).parity()?;
            for (pos, &coord) in b.info_coords.iter().enumerate() {
                col_of[i][coord] = mixer.col(b.col_offset + pos);
            }
            for (pos, &coord) in b.parity_coords.iter().enumerate() {
                let mut col = vec![0u64; l];
                for j in 0..parity.rows() {
                    let w = parity[(j, pos)];
                    if w == 0 {
                        continue;
                    }
                    let mcol = mixer.col(b.col_offset + j);
                    for (r, item) in col.iter_mut().enumerate() {
                        *item = field.add(*item, field.mul(w, mcol[r]));
                    }
                }
                col_of[i][coord] = col;
            }
        }
    }

    let mut matrices = Vec::with_capacity(p.config.servers);
    for j in 0..p.config.servers {
        let ids = &schedule.per_server[j];
        let mut mat = FieldMatrix::zeros(field, m * l, ids.len());
        for (c, &sid) in ids.iter().enumerate() {
            let slot = &schedule.slots[sid];
            for (pos, &nu) in slot.lam.iter().enumerate() {
                let col = &col_of[nu][slot.symbol_index[pos]];
                for r in 0..l {
                    mat[(nu * l + r, c)] = col[r];
                }
            }
        }
        matrices.push(mat);
    }
    Ok(QuerySet {
        theta,
        matrices,
        mix,
    })
}

/// Sample user randomness and build the queries for retrieving `theta`.
pub fn generate_queries<R: Rng>(
    schedule: &Schedule,
    field: PrimeField,
    theta: usize,
    rng: &mut R,
) -> Result<QuerySet> {
    let mix = sample_mix_state(&schedule.params, field, theta, rng)?;
    queries_from_mix(schedule, field, mix)
}

/// The replicated database: M records, each an L x b matrix (b stripes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    field: PrimeField,
    records: Vec<FieldMatrix>,
}

impl Database {
    pub fn new(field: PrimeField, records: Vec<FieldMatrix>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::InvalidConfig("need at least 2 records".into()));
        }
        let (l, b) = (records[0].rows(), records[0].cols());
        if l == 0 || b == 0 {
            return Err(Error::InvalidConfig("empty records".into()));
        }
        for r in &records {
            if r.rows() != l || r.cols() != b || r.field() != field {
                return Err(Error::Shape("inconsistent record shapes".into()));
            }
        }
        Ok(Database { field, records })
    }

    pub fn random<R: Rng>(
        field: PrimeField,
        num_records: usize,
        sub_packetization: usize,
        stripes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let records = (0..num_records)
            .map(|_| FieldMatrix::sample_uniform(field, sub_packetization, stripes, rng))
            .collect();
        Database::new(field, records)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn num_records(&self) -> usize {
        self.records.len()
    }

    pub fn sub_packetization(&self) -> usize {
        self.records[0].rows()
    }

    pub fn stripes(&self) -> usize {
        self.records[0].cols()
    }

    pub fn record(&self, i: usize) -> &FieldMatrix {
        &self.records[i]
    }

    pub fn records(&self) -> &[FieldMatrix] {
        &self.records
    }

    /// Records stacked vertically into an (M*L) x b matrix.
    pub fn stacked(&self) -> Result<FieldMatrix> {
        let l = self.sub_packetization();
        let b = self.stripes();
        let mut out = FieldMatrix::zeros(self.field, self.records.len() * l, b);
        for (i, rec) in self.records.iter().enumerate() {
            for r in 0..l {
                for c in 0..b {
                    out[(i * l + r, c)] = rec[(r, c)];
                }
            }
        }
        Ok(out)
    }
}

/// The server's answer: one matrix product, no branching on query content.
pub fn answer(db: &Database, server_matrix: &FieldMatrix) -> Result<FieldMatrix> {
    let ml = db.num_records() * db.sub_packetization();
    if server_matrix.rows() != ml {
        return Err(Error::Shape(format!(
            "query has {} rows, database implies {ml}",
            server_matrix.rows()
        )));
    }
    server_matrix.transpose().mul(&db.stacked()?)
}

/// Recover the desired record from all N answers.
pub fn decode(
    schedule: &Schedule,
    field: PrimeField,
    mix: &MixState,
    answers: &[FieldMatrix],
) -> Result<FieldMatrix> {
    let p = &schedule.params;
    let l = p.sub_packetization;
    let theta = mix.theta;
    if answers.len() != p.config.servers {
        return Err(Error::Shape("need answers from all servers".into()));
    }
    let b = answers[0].cols();
    for (j, a) in answers.iter().enumerate() {
        if a.rows() != p.gamma(j) || a.cols() != b {
            return Err(Error::Shape(format!("answer {j} has wrong shape")));
        }
    }
    let codes = CodeSet::new(p, field)?;

    // received value of each slot, per stripe
    let mut pos_in_server = vec![0usize; schedule.slots.len()];
    for ids in &schedule.per_server {
        for (c, &sid) in ids.iter().enumerate() {
            pos_in_server[sid] = c;
        }
    }
    let received = |sid: usize, stripe: usize| -> u64 {
        let slot = &schedule.slots[sid];
        answers[slot.server][(pos_in_server[sid], stripe)]
    };

    // group slots by record subset, in slot order
    let mut by_lam: Vec<(Vec<usize>, Vec<usize>)> = vec![];
    for (sid, slot) in schedule.slots.iter().enumerate() {
        match by_lam.iter_mut().find(|(lam, _)| *lam == slot.lam) {
            Some((_, ids)) => ids.push(sid),
            None => by_lam.push((slot.lam.clone(), vec![sid])),
        }
    }

    let mut u_theta = FieldMatrix::zeros(field, l, b);
    for (lam, ids) in &by_lam {
        if lam.as_slice() == [theta] {
            // direct desired symbols
            for &sid in ids {
                let coord = schedule.slots[sid].coord_of(theta).unwrap();
                for stripe in 0..b {
                    u_theta[(coord, stripe)] = received(sid, stripe);
                }
            }
        } else if !lam.contains(&theta) {
            // predict the parity of this undesired codeword and cancel it
            // out of the corresponding mixed slots
            let k = lam.len();
            let parity = codes.code(k).parity()?;
            let mut under: Vec<usize> = lam.clone();
            under.push(theta);
            under.sort_unstable();
            let mixed_ids = by_lam
                .iter()
                .find(|(other, _)| *other == under)
                .map(|(_, ids)| ids.as_slice())
                .unwrap_or(&[]);
            if ids.len() != parity.rows() || mixed_ids.len() != parity.cols() {
                return Err(Error::Internal("codeword slot counts mismatch".into()));
            }
            let mut info = FieldMatrix::zeros(field, 1, ids.len());
            for stripe in 0..b {
                for (c, &sid) in ids.iter().enumerate() {
                    info[(0, c)] = received(sid, stripe);
                }
                let predicted = info.mul(&parity)?;
                for (c, &sid) in mixed_ids.iter().enumerate() {
                    let coord = schedule.slots[sid].coord_of(theta).unwrap();
                    u_theta[(coord, stripe)] =
                        field.sub(received(sid, stripe), predicted[(0, c)]);
                }
            }
        }
    }

    // U_theta^T = W_theta^T S_theta  =>  W_theta = (S_theta^-1)^T U_theta
    mix.s_theta.invert()?.transpose().mul(&u_theta)
}

/// The ell x L matrix G with U_i = (info symbols) * G under the schedule's
/// coordinate order: the block-diagonal of the per-Lambda systematic
/// generators, composed with the schedule-induced column permutation.
pub fn materialize_expanded_generator(
    schedule: &Schedule,
    field: PrimeField,
    record: usize,
    theta: usize,
) -> Result<FieldMatrix> {
    if record == theta {
        return Err(Error::Index("record equals theta".into()));
    }
    let p = &schedule.params;
    let layout = build_layout(schedule, theta)?;
    let codes = CodeSet::new(p, field)?;
    let mut g = FieldMatrix::zeros(field, p.mixing_width, p.sub_packetization);
    for b in &layout.blocks[record] {
        let k = b.lam.len();
        let parity = codes.code(k).parity()?;
        for (pos, &coord) in b.info_coords.iter().enumerate() {
            g[(b.col_offset + pos, coord)] = 1;
        }
        for (pos, &coord) in b.parity_coords.iter().enumerate() {
            for j in 0..parity.rows() {
                g[(b.col_offset + j, coord)] = parity[(j, pos)];
            }
        }
    }
    Ok(g)
}
