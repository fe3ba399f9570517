//! Accounts, transactions, blocks, chains, and a seeded synthetic chain generator.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::field::FieldElement;
use crate::hash::{hash_elements, hash_with_domain, Digest, Domain, DIGEST_LEN};
use crate::merkle::{build_tree, TxTree};

/// Largest admissible amount. Keeping amounts below 2^40 lets sums over any realistic number of
/// transactions stay exact in the field.
pub const MAX_AMOUNT: u64 = (1 << 40) - 1;

pub const ACCOUNT_LIMBS: usize = 8;
/// Canonical serialization length in bytes.
pub const TX_BYTES: usize = 32 + 32 + 8 + 8 + 4;
/// Number of 32-bit limbs the canonical serialization splits into.
pub const TX_LIMBS: usize = TX_BYTES / 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(&'static str),
    #[error("amount {0} exceeds the maximum of 2^40 - 1")]
    AmountTooLarge(u64),
    #[error("block {0} has no transactions")]
    EmptyBlock(u64),
    #[error("block {0} repeats a transaction hash")]
    DuplicateTransaction(u64),
    #[error("block {index} stores root {stored} but its transactions hash to {computed}")]
    RootMismatch { index: u64, stored: Digest, computed: Digest },
    #[error("transaction stores hash {stored} but hashes to {computed}")]
    TxHashMismatch { stored: Digest, computed: Digest },
    #[error("block at position {position} has index {index}")]
    NonConsecutive { position: usize, index: u64 },
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AccountId(pub [u8; 32]);

impl AccountId {
    /// Little-endian 32-bit limbs, the form the circuits compare.
    pub fn limbs(&self) -> [u32; ACCOUNT_LIMBS] {
        let mut out = [0u32; ACCOUNT_LIMBS];
        for (o, c) in out.iter_mut().zip(self.0.chunks_exact(4)) {
            *o = u32::from_le_bytes(c.try_into().expect("4 bytes"));
        }
        out
    }

    pub fn to_elements(&self) -> [FieldElement; ACCOUNT_LIMBS] {
        self.limbs().map(FieldElement::from)
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut b = [0u8; 32];
        rng.fill(&mut b);
        Self(b)
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AccountId({})", hex::encode(self.0))
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for AccountId {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut b = [0u8; 32];
        hex::decode_to_slice(s, &mut b)?;
        Ok(Self(b))
    }
}

impl Serialize for AccountId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for AccountId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = AccountId;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a 64-character hex account id")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<AccountId, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_str(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTransaction")]
pub struct Transaction {
    sender: AccountId,
    receiver: AccountId,
    amount: u64,
    nonce: u64,
    payload_tag: u32,
    tx_hash: Digest,
}

#[derive(Deserialize)]
struct RawTransaction {
    sender: AccountId,
    receiver: AccountId,
    amount: u64,
    nonce: u64,
    payload_tag: u32,
    tx_hash: Digest,
}

impl TryFrom<RawTransaction> for Transaction {
    type Error = LedgerError;

    fn try_from(r: RawTransaction) -> Result<Self, LedgerError> {
        let tx = Transaction::new(r.sender, r.receiver, r.amount, r.nonce, r.payload_tag)?;
        if tx.tx_hash != r.tx_hash {
            return Err(LedgerError::TxHashMismatch { stored: r.tx_hash, computed: tx.tx_hash });
        }
        Ok(tx)
    }
}

impl Transaction {
    pub fn new(
        sender: AccountId,
        receiver: AccountId,
        amount: u64,
        nonce: u64,
        payload_tag: u32,
    ) -> Result<Self, LedgerError> {
        if amount > MAX_AMOUNT {
            return Err(LedgerError::AmountTooLarge(amount));
        }
        let mut tx = Self { sender, receiver, amount, nonce, payload_tag, tx_hash: Digest::ZERO };
        tx.tx_hash = hash_elements(&tx.encode());
        Ok(tx)
    }

    pub fn sender(&self) -> AccountId {
        self.sender
    }
    pub fn receiver(&self) -> AccountId {
        self.receiver
    }
    pub fn amount(&self) -> u64 {
        self.amount
    }
    pub fn nonce(&self) -> u64 {
        self.nonce
    }
    pub fn payload_tag(&self) -> u32 {
        self.payload_tag
    }
    pub fn tx_hash(&self) -> Digest {
        self.tx_hash
    }

    pub fn touches(&self, account: &AccountId) -> bool {
        self.sender == *account || self.receiver == *account
    }

    /// sender ‖ receiver ‖ amount (8 bytes LE) ‖ nonce (8 bytes LE) ‖ payload_tag (4 bytes LE)
    pub fn canonical_bytes(&self) -> [u8; TX_BYTES] {
        let mut b = [0u8; TX_BYTES];
        b[..32].copy_from_slice(&self.sender.0);
        b[32..64].copy_from_slice(&self.receiver.0);
        b[64..72].copy_from_slice(&self.amount.to_le_bytes());
        b[72..80].copy_from_slice(&self.nonce.to_le_bytes());
        b[80..].copy_from_slice(&self.payload_tag.to_le_bytes());
        b
    }

    /// The serialization as 32-bit limbs; limb boundaries coincide with field boundaries.
    pub fn limbs(&self) -> [u32; TX_LIMBS] {
        let b = self.canonical_bytes();
        let mut out = [0u32; TX_LIMBS];
        for (o, c) in out.iter_mut().zip(b.chunks_exact(4)) {
            *o = u32::from_le_bytes(c.try_into().expect("4 bytes"));
        }
        out
    }

    /// Compresses the serialization into exactly four field elements.
    pub fn encode(&self) -> [FieldElement; DIGEST_LEN] {
        let limbs = self.limbs().map(FieldElement::from);
        hash_with_domain(Domain::TxEncode, &limbs).0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub transactions: Vec<Transaction>,
    pub tx_root: Digest,
}

impl Block {
    pub fn new(index: u64, transactions: Vec<Transaction>) -> Result<Self, LedgerError> {
        let tree = tree_of(index, &transactions)?;
        Ok(Self { index, transactions, tx_root: tree.root() })
    }

    pub fn tree(&self) -> TxTree {
        tree_of(self.index, &self.transactions).expect("validated at construction")
    }

    /// Re-derives the root and checks distinctness; used on blocks loaded from disk.
    pub fn validate(&self) -> Result<(), LedgerError> {
        let computed = tree_of(self.index, &self.transactions)?.root();
        if computed != self.tx_root {
            return Err(LedgerError::RootMismatch { index: self.index, stored: self.tx_root, computed });
        }
        Ok(())
    }
}

fn tree_of(index: u64, txs: &[Transaction]) -> Result<TxTree, LedgerError> {
    if txs.is_empty() {
        return Err(LedgerError::EmptyBlock(index));
    }
    let mut hashes: Vec<Digest> = txs.iter().map(Transaction::tx_hash).collect();
    let tree = build_tree(&hashes).expect("nonempty");
    hashes.sort_unstable();
    if hashes.windows(2).any(|w| w[0] == w[1]) {
        return Err(LedgerError::DuplicateTransaction(index));
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Chain {
    pub fn new(blocks: Vec<Block>) -> Result<Self, LedgerError> {
        for (position, b) in blocks.iter().enumerate() {
            if b.index != position as u64 {
                return Err(LedgerError::NonConsecutive { position, index: b.index });
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, index: u64) -> Option<&Block> {
        usize::try_from(index).ok().and_then(|i| self.blocks.get(i))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn total_transactions(&self) -> usize {
        self.blocks.iter().map(|b| b.transactions.len()).sum()
    }

    /// The first `height` blocks, as a lagging node would see them.
    pub fn prefix(&self, height: usize) -> Chain {
        Chain { blocks: self.blocks[..height.min(self.blocks.len())].to_vec() }
    }
}

pub fn tx_count_for_account(chain: &Chain, account: &AccountId) -> u64 {
    chain
        .blocks
        .iter()
        .flat_map(|b| &b.transactions)
        .filter(|tx| tx.touches(account))
        .count() as u64
}

pub fn tx_root_of(chain: &Chain, block_index: u64) -> Option<Digest> {
    chain.block(block_index).map(|b| b.tx_root)
}

pub const GEN_MIN_AMOUNT: u64 = 1;
pub const GEN_MAX_AMOUNT: u64 = 1_000_000;
/// Payload tags are drawn from `0..GEN_PAYLOAD_TAGS`, e.g. candidates in a vote.
pub const GEN_PAYLOAD_TAGS: u32 = 4;
const COUNTERPARTY_POOL: usize = 256;

/// Deterministic synthetic chain: every block holds `txs_per_block` transactions of which exactly
/// `relevant_per_block`, at random positions, touch `account`.
pub fn generate_chain(
    seed: u64,
    num_blocks: usize,
    txs_per_block: usize,
    relevant_per_block: usize,
    account: AccountId,
) -> Result<Chain, LedgerError> {
    if num_blocks == 0 || txs_per_block == 0 || relevant_per_block == 0 {
        return Err(LedgerError::InvalidParams("all counts must be positive"));
    }
    if relevant_per_block > txs_per_block {
        return Err(LedgerError::InvalidParams("relevant_per_block exceeds txs_per_block"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<AccountId> = (0..COUNTERPARTY_POOL)
        .map(|_| loop {
            let a = AccountId::random(&mut rng);
            if a != account {
                break a;
            }
        })
        .collect();
    let mut nonce = 0u64;
    let mut blocks = Vec::with_capacity(num_blocks);
    for index in 0..num_blocks as u64 {
        let mut relevant = alloc::vec![false; txs_per_block];
        for i in sample(&mut rng, txs_per_block, relevant_per_block) {
            relevant[i] = true;
        }
        let mut txs = Vec::with_capacity(txs_per_block);
        for is_relevant in relevant {
            let a = pool[rng.gen_range(0..pool.len())];
            let b = pool[rng.gen_range(0..pool.len())];
            let (sender, receiver) = match (is_relevant, rng.gen::<bool>()) {
                (true, true) => (account, a),
                (true, false) => (a, account),
                (false, _) => (a, b),
            };
            let amount = rng.gen_range(GEN_MIN_AMOUNT..=GEN_MAX_AMOUNT);
            let tag = rng.gen_range(0..GEN_PAYLOAD_TAGS);
            txs.push(Transaction::new(sender, receiver, amount, nonce, tag)?);
            nonce += 1;
        }
        blocks.push(Block::new(index, txs)?);
    }
    Chain::new(blocks)
}
