//! Sensor samples in an EPC Gen2 tag-memory image.
//!
//! EPC layout (six 16-bit words, MSB first):
//!
//! | word | contents                                   |
//! |------|--------------------------------------------|
//! | 0    | scheme tag (8 bits) ∥ node id (8 bits)     |
//! | 1    | sequence counter, wrapping at 2¹⁶          |
//! | 2    | 6 zero bits ∥ 10-bit ADC code              |
//! | 3..6 | fixed namespace / serial filler            |
//!
//! The EPC bank holds `StoredCRC ∥ PC ∥ EPC`, the CRC being the Gen2 CRC-16
//! over `PC ∥ EPC`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use thiserror::Error;

use crate::node::AdcCode;

/// Scheme tag carried in the top byte of EPC word 0.
pub const SENSOR_SCHEME: u8 = 0x5E;
/// Words 3..6 of every sensor EPC.
pub const EPC_FILLER: [u16; 3] = [0x4D58, 0x324B, 0x0001];
pub const EPC_WORDS: usize = 6;
/// Non-volatile memory of the I²C-RFID chip, in bits.
pub const NVM_BUDGET_BITS: u32 = 2176;
/// Register left after running a message followed by its transmitted CRC.
pub const CRC16_RESIDUE: u16 = 0x1D0F;

const SAMPLE_MASK: u16 = 0x03FF;
const MAX_SAMPLE_CODE: u16 = 1023;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EpcError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: u32 },
    #[error("unknown EPC scheme tag 0x{0:02X}")]
    UnknownScheme(u8),
    #[error("reserved sample bits set in word 0x{0:04X}")]
    ReservedBits(u16),
    #[error("EPC bank too small: need {needed} bits, have {available}")]
    Capacity { needed: u32, available: u32 },
    #[error("CRC mismatch: stored 0x{stored:04X}, computed 0x{computed:04X}")]
    CrcMismatch { stored: u16, computed: u16 },
    #[error("PC length field {0} does not describe a 96-bit EPC")]
    PcLength(u16),
    #[error("bank layout exceeds the {NVM_BUDGET_BITS}-bit budget ({0} bits)")]
    Budget(u32),
    #[error("bank sizes must be multiples of 16 bits ({0})")]
    Alignment(&'static str),
    #[error("hex dump line {line}: {reason}")]
    HexDump { line: usize, reason: String },
}

// ---------------------------------------------------------------------------
// CRC-16 (poly 0x1021, preset 0xFFFF, complemented, MSB first)
// ---------------------------------------------------------------------------

const CRC_POLY: u16 = 0x1021;
const CRC_PRESET: u16 = 0xFFFF;

const CRC_TABLE: [u16; 256] = build_crc_table();

const fn build_crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut reg = (i as u16) << 8;
        let mut b = 0;
        while b < 8 {
            reg = if reg & 0x8000 != 0 {
                (reg << 1) ^ CRC_POLY
            } else {
                reg << 1
            };
            b += 1;
        }
        table[i] = reg;
        i += 1;
    }
    table
}

/// Incremental Gen2 CRC-16.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crc16 {
    reg: u16,
}

impl Default for Crc16 {
    fn default() -> Self {
        Self::new()
    }
}

impl Crc16 {
    pub const fn new() -> Self {
        Self { reg: CRC_PRESET }
    }

    pub fn update_bit(&mut self, bit: bool) {
        let top = self.reg & 0x8000 != 0;
        self.reg <<= 1;
        if top ^ bit {
            self.reg ^= CRC_POLY;
        }
    }

    pub fn update_bits<I: IntoIterator<Item = bool>>(&mut self, bits: I) {
        for bit in bits {
            self.update_bit(bit);
        }
    }

    pub fn update_bytes(&mut self, bytes: &[u8]) {
        for &byte in bytes {
            let idx = ((self.reg >> 8) as u8 ^ byte) as usize;
            self.reg = (self.reg << 8) ^ CRC_TABLE[idx];
        }
    }

    pub fn update_words(&mut self, words: &[u16]) {
        for w in words {
            self.update_bytes(&w.to_be_bytes());
        }
    }

    /// Raw shift register, before the final complement.
    pub const fn register(&self) -> u16 {
        self.reg
    }

    /// Value transmitted / stored after the message.
    pub const fn finish(&self) -> u16 {
        !self.reg
    }
}

/// Transmitted CRC over an arbitrary bit string.
pub fn crc16_bits<I: IntoIterator<Item = bool>>(bits: I) -> u16 {
    let mut c = Crc16::new();
    c.update_bits(bits);
    c.finish()
}

pub fn crc16_bytes(bytes: &[u8]) -> u16 {
    let mut c = Crc16::new();
    c.update_bytes(bytes);
    c.finish()
}

pub fn crc16_words(words: &[u16]) -> u16 {
    let mut c = Crc16::new();
    c.update_words(words);
    c.finish()
}

/// MSB-first bits of a word slice.
pub fn word_bits(words: &[u16]) -> impl Iterator<Item = bool> + '_ {
    words
        .iter()
        .flat_map(|w| (0..16).rev().map(move |i| (w >> i) & 1 == 1))
}

// ---------------------------------------------------------------------------
// EPC layout
// ---------------------------------------------------------------------------

/// The decoded content of a sensor EPC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorSample {
    pub node_id: u8,
    pub seq: u16,
    pub code: AdcCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Epc96 {
    words: [u16; EPC_WORDS],
}

impl Epc96 {
    pub const fn from_words(words: [u16; EPC_WORDS]) -> Self {
        Self { words }
    }

    pub const fn words(&self) -> &[u16; EPC_WORDS] {
        &self.words
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(24);
        for w in &self.words {
            let _ = write!(s, "{w:04X}");
        }
        s
    }
}

impl fmt::Display for Epc96 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.words {
            write!(f, "{w:04X}")?;
        }
        Ok(())
    }
}

pub fn encode_epc(node_id: u32, seq: u16, code: AdcCode) -> Result<Epc96, EpcError> {
    if node_id > 0xFF {
        return Err(EpcError::OutOfRange {
            field: "node_id",
            value: node_id,
        });
    }
    if code.value() > MAX_SAMPLE_CODE {
        return Err(EpcError::OutOfRange {
            field: "code",
            value: code.value() as u32,
        });
    }
    Ok(Epc96 {
        words: [
            ((SENSOR_SCHEME as u16) << 8) | node_id as u16,
            seq,
            code.value() & SAMPLE_MASK,
            EPC_FILLER[0],
            EPC_FILLER[1],
            EPC_FILLER[2],
        ],
    })
}

pub fn decode_epc(epc: &Epc96) -> Result<SensorSample, EpcError> {
    let [header, seq, sample, ..] = epc.words;
    let scheme = (header >> 8) as u8;
    if scheme != SENSOR_SCHEME {
        return Err(EpcError::UnknownScheme(scheme));
    }
    if sample & !SAMPLE_MASK != 0 {
        return Err(EpcError::ReservedBits(sample));
    }
    Ok(SensorSample {
        node_id: (header & 0xFF) as u8,
        seq,
        code: AdcCode::new(sample),
    })
}

// ---------------------------------------------------------------------------
// Tag memory
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bank {
    Reserved,
    Epc,
    Tid,
    User,
}

impl Bank {
    pub const ALL: [Bank; 4] = [Bank::Reserved, Bank::Epc, Bank::Tid, Bank::User];

    pub fn name(self) -> &'static str {
        match self {
            Bank::Reserved => "reserved",
            Bank::Epc => "epc",
            Bank::Tid => "tid",
            Bank::User => "user",
        }
    }

    fn index(self) -> usize {
        match self {
            Bank::Reserved => 0,
            Bank::Epc => 1,
            Bank::Tid => 2,
            Bank::User => 3,
        }
    }
}

/// Bank sizes in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct BankLayout {
    pub reserved_bits: u32,
    pub epc_bits: u32,
    pub tid_bits: u32,
    pub user_bits: u32,
}

impl Default for BankLayout {
    fn default() -> Self {
        Self {
            reserved_bits: 64,
            epc_bits: 128,
            tid_bits: 96,
            user_bits: NVM_BUDGET_BITS - 64 - 128 - 96,
        }
    }
}

impl BankLayout {
    pub fn total_bits(&self) -> u32 {
        self.reserved_bits + self.epc_bits + self.tid_bits + self.user_bits
    }

    pub fn validate(&self) -> Result<(), EpcError> {
        for (bits, name) in [
            (self.reserved_bits, "reserved"),
            (self.epc_bits, "epc"),
            (self.tid_bits, "tid"),
            (self.user_bits, "user"),
        ] {
            if bits % 16 != 0 {
                return Err(EpcError::Alignment(name));
            }
        }
        let total = self
            .reserved_bits
            .checked_add(self.epc_bits)
            .and_then(|t| t.checked_add(self.tid_bits))
            .and_then(|t| t.checked_add(self.user_bits))
            .unwrap_or(u32::MAX);
        if total > NVM_BUDGET_BITS {
            return Err(EpcError::Budget(total));
        }
        Ok(())
    }
}

/// NVM image of the I²C-RFID chip, word addressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMemory {
    banks: [Vec<u16>; 4],
}

const EPC_BANK_CRC: usize = 0;
const EPC_BANK_PC: usize = 1;
const EPC_BANK_EPC: usize = 2;
const PC_LENGTH_SHIFT: u16 = 11;

impl TagMemory {
    pub fn new(layout: BankLayout) -> Result<Self, EpcError> {
        layout.validate()?;
        let words = |bits: u32| vec![0u16; (bits / 16) as usize];
        Ok(Self {
            banks: [
                words(layout.reserved_bits),
                words(layout.epc_bits),
                words(layout.tid_bits),
                words(layout.user_bits),
            ],
        })
    }

    pub fn layout(&self) -> BankLayout {
        let bits = |b: Bank| self.banks[b.index()].len() as u32 * 16;
        BankLayout {
            reserved_bits: bits(Bank::Reserved),
            epc_bits: bits(Bank::Epc),
            tid_bits: bits(Bank::Tid),
            user_bits: bits(Bank::User),
        }
    }

    pub fn bank(&self, bank: Bank) -> &[u16] {
        &self.banks[bank.index()]
    }

    /// Raw access, as over the I²C EEPROM interface.
    pub fn bank_mut(&mut self, bank: Bank) -> &mut [u16] {
        &mut self.banks[bank.index()]
    }

    pub fn flip_bit(&mut self, bank: Bank, bit: usize) {
        let words = self.bank_mut(bank);
        words[bit / 16] ^= 0x8000 >> (bit % 16);
    }

    pub fn pc_word(&self) -> Option<u16> {
        self.bank(Bank::Epc).get(EPC_BANK_PC).copied()
    }

    pub fn stored_crc(&self) -> Option<u16> {
        self.bank(Bank::Epc).get(EPC_BANK_CRC).copied()
    }

    /// Writes `epc`, rewrites the PC length field and recomputes StoredCRC.
    pub fn commit(&mut self, epc: &Epc96) -> Result<(), EpcError> {
        let needed = (EPC_BANK_EPC + EPC_WORDS) as u32 * 16;
        let bank = &mut self.banks[Bank::Epc.index()];
        let available = bank.len() as u32 * 16;
        if available < needed {
            return Err(EpcError::Capacity { needed, available });
        }
        let pc = (bank[EPC_BANK_PC] & 0x07FF) | ((EPC_WORDS as u16) << PC_LENGTH_SHIFT);
        bank[EPC_BANK_PC] = pc;
        bank[EPC_BANK_EPC..EPC_BANK_EPC + EPC_WORDS].copy_from_slice(&epc.words);
        bank[EPC_BANK_CRC] = crc16_words(&bank[EPC_BANK_PC..EPC_BANK_EPC + EPC_WORDS]);
        Ok(())
    }

    /// Functional form of [`TagMemory::commit`].
    pub fn committed(mut self, epc: &Epc96) -> Result<Self, EpcError> {
        self.commit(epc)?;
        Ok(self)
    }

    /// What a reader obtains over the air: the EPC after CRC verification.
    pub fn read_epc(&self) -> Result<Epc96, EpcError> {
        let bank = self.bank(Bank::Epc);
        let needed = (EPC_BANK_EPC + EPC_WORDS) as u32 * 16;
        if bank.len() < EPC_BANK_EPC + EPC_WORDS {
            return Err(EpcError::Capacity {
                needed,
                available: bank.len() as u32 * 16,
            });
        }
        let pc = bank[EPC_BANK_PC];
        let length = pc >> PC_LENGTH_SHIFT;
        if length as usize != EPC_WORDS {
            return Err(EpcError::PcLength(length));
        }
        let stored = bank[EPC_BANK_CRC];
        let computed = crc16_words(&bank[EPC_BANK_PC..EPC_BANK_EPC + EPC_WORDS]);
        if stored != computed {
            return Err(EpcError::CrcMismatch { stored, computed });
        }
        let mut words = [0u16; EPC_WORDS];
        words.copy_from_slice(&bank[EPC_BANK_EPC..EPC_BANK_EPC + EPC_WORDS]);
        Ok(Epc96 { words })
    }

    /// One bank per line: `<name> <WORD> <WORD> ...`, big-endian hex words.
    pub fn hex_dump(&self) -> String {
        let mut out = String::new();
        for bank in Bank::ALL {
            out.push_str(bank.name());
            for w in self.bank(bank) {
                let _ = write!(out, " {w:04X}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_hex_dump(text: &str) -> Result<Self, EpcError> {
        let mut banks: [Option<Vec<u16>>; 4] = [None, None, None, None];
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let mut fields = line.split_whitespace();
            let Some(name) = fields.next() else { continue };
            let bank = Bank::ALL
                .into_iter()
                .find(|b| b.name() == name)
                .ok_or_else(|| EpcError::HexDump {
                    line: line_no,
                    reason: alloc::format!("unknown bank '{name}'"),
                })?;
            if banks[bank.index()].is_some() {
                return Err(EpcError::HexDump {
                    line: line_no,
                    reason: alloc::format!("duplicate bank '{name}'"),
                });
            }
            let words = fields
                .map(|f| {
                    if f.len() != 4 {
                        return Err(EpcError::HexDump {
                            line: line_no,
                            reason: alloc::format!("word '{f}' is not 4 hex digits"),
                        });
                    }
                    u16::from_str_radix(f, 16).map_err(|_| EpcError::HexDump {
                        line: line_no,
                        reason: alloc::format!("bad hex word '{f}'"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            banks[bank.index()] = Some(words);
        }
        let [r, e, t, u] = banks;
        let mem = Self {
            banks: [
                r.unwrap_or_default(),
                e.unwrap_or_default(),
                t.unwrap_or_default(),
                u.unwrap_or_default(),
            ],
        };
        mem.layout().validate()?;
        Ok(mem)
    }
}
