//! A small register machine with exact step counting.
//!
//! Input goes in `R0`, output is read from `R1`. Every executed instruction,
//! including the final `halt`, costs one step. Falling off the end of the
//! program counts as halting (without the extra step).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Instr {
    /// `R[reg] += 1`, fall through.
    Inc {
        reg: usize,
    },
    /// If `R[reg] == 0` jump to `target`, otherwise decrement and fall through.
    Dec {
        reg: usize,
        target: usize,
    },
    Halt,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("jump target {target} at instruction {at} is past the end of the program")]
    BadTarget { at: usize, target: usize },
    #[error("empty program")]
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Program {
    pub code: Vec<Instr>,
}

impl Program {
    pub fn new(code: Vec<Instr>) -> Result<Self, ProgramError> {
        if code.is_empty() {
            return Err(ProgramError::Empty);
        }
        for (at, ins) in code.iter().enumerate() {
            if let Instr::Dec { target, .. } = ins {
                // a target equal to the length means "halt by falling off"
                if *target > code.len() {
                    return Err(ProgramError::BadTarget {
                        at,
                        target: *target,
                    });
                }
            }
        }
        Ok(Program { code })
    }

    fn registers(&self) -> usize {
        let top = self
            .code
            .iter()
            .map(|i| match i {
                Instr::Inc { reg } | Instr::Dec { reg, .. } => *reg,
                Instr::Halt => 0,
            })
            .max()
            .unwrap_or(0);
        (top + 1).max(2)
    }

    /// `n ↦ 2n`, taking `4n + 2` steps.
    pub fn doubling() -> Self {
        Program {
            code: vec![
                Instr::Dec { reg: 0, target: 4 },
                Instr::Inc { reg: 1 },
                Instr::Inc { reg: 1 },
                Instr::Dec { reg: 2, target: 0 },
                Instr::Halt,
            ],
        }
    }

    /// `n ↦ n/2` on even inputs; loops forever on odd ones.
    pub fn halving_even() -> Self {
        Program {
            code: vec![
                Instr::Dec { reg: 0, target: 4 },
                Instr::Dec { reg: 0, target: 5 },
                Instr::Inc { reg: 1 },
                Instr::Dec { reg: 2, target: 0 },
                Instr::Halt,
                Instr::Dec { reg: 2, target: 5 },
            ],
        }
    }

    /// `n ↦ n + 1`, taking `3n + 3` steps.
    pub fn successor() -> Self {
        Program {
            code: vec![
                Instr::Dec { reg: 0, target: 3 },
                Instr::Inc { reg: 1 },
                Instr::Dec { reg: 2, target: 0 },
                Instr::Inc { reg: 1 },
                Instr::Halt,
            ],
        }
    }
}

/// A paused computation that can be resumed with a larger step budget.
#[derive(Clone, Debug)]
pub struct Run {
    regs: Vec<u64>,
    pc: usize,
    steps: u64,
    halted: bool,
}

impl Run {
    pub fn start(program: &Program, input: u64) -> Self {
        let mut regs = vec![0; program.registers()];
        regs[0] = input;
        Run {
            regs,
            pc: 0,
            steps: 0,
            halted: false,
        }
    }

    /// Executes until halting or until `budget` total steps have been used.
    pub fn advance(&mut self, program: &Program, budget: u64) {
        while !self.halted && self.steps < budget {
            let Some(ins) = program.code.get(self.pc) else {
                self.halted = true;
                break;
            };
            self.steps += 1;
            match *ins {
                Instr::Inc { reg } => {
                    self.regs[reg] += 1;
                    self.pc += 1;
                }
                Instr::Dec { reg, target } => {
                    if self.regs[reg] == 0 {
                        self.pc = target;
                    } else {
                        self.regs[reg] -= 1;
                        self.pc += 1;
                    }
                }
                Instr::Halt => self.halted = true,
            }
        }
        if !self.halted && self.pc >= program.code.len() {
            self.halted = true;
        }
    }

    /// `(halting time, output)` once the run has halted.
    pub fn result(&self) -> Option<(u64, u64)> {
        self.halted.then(|| (self.steps, self.regs[1]))
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}
