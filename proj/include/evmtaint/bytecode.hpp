#pragma once

#include "evmtaint/word.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmtaint {

enum class OpcodeClass {
  StackOnly,
  LoadStore,
  Call,
  ControlFlow,
  Environment,
  Halt,
  Invalid,
};

const char* to_string(OpcodeClass c);

struct OpcodeInfo {
  const char* name;
  uint8_t pops;
  uint8_t pushes;
  uint8_t immediate_bytes;  // nonzero only for PUSH1..PUSH32
  OpcodeClass klass;
  bool known;  // false for unassigned byte values
};

// Indexed by raw byte value; unknown bytes come back as Invalid-class
// entries named "INVALID_xx".
const OpcodeInfo& opcode_info(uint8_t opcode);

namespace op {
// The opcodes the analysis dispatches on by value.
constexpr uint8_t STOP = 0x00;
constexpr uint8_t ADD = 0x01;
constexpr uint8_t MUL = 0x02;
constexpr uint8_t SUB = 0x03;
constexpr uint8_t DIV = 0x04;
constexpr uint8_t SDIV = 0x05;
constexpr uint8_t MOD = 0x06;
constexpr uint8_t SMOD = 0x07;
constexpr uint8_t ADDMOD = 0x08;
constexpr uint8_t MULMOD = 0x09;
constexpr uint8_t EXP = 0x0a;
constexpr uint8_t SIGNEXTEND = 0x0b;
constexpr uint8_t LT = 0x10;
constexpr uint8_t GT = 0x11;
constexpr uint8_t SLT = 0x12;
constexpr uint8_t SGT = 0x13;
constexpr uint8_t EQ = 0x14;
constexpr uint8_t ISZERO = 0x15;
constexpr uint8_t AND = 0x16;
constexpr uint8_t OR = 0x17;
constexpr uint8_t XOR = 0x18;
constexpr uint8_t NOT = 0x19;
constexpr uint8_t BYTE = 0x1a;
constexpr uint8_t SHL = 0x1b;
constexpr uint8_t SHR = 0x1c;
constexpr uint8_t SAR = 0x1d;
constexpr uint8_t KECCAK256 = 0x20;
constexpr uint8_t ADDRESS = 0x30;
constexpr uint8_t BALANCE = 0x31;
constexpr uint8_t ORIGIN = 0x32;
constexpr uint8_t CALLER = 0x33;
constexpr uint8_t CALLVALUE = 0x34;
constexpr uint8_t CALLDATALOAD = 0x35;
constexpr uint8_t CALLDATASIZE = 0x36;
constexpr uint8_t CALLDATACOPY = 0x37;
constexpr uint8_t CODESIZE = 0x38;
constexpr uint8_t CODECOPY = 0x39;
constexpr uint8_t GASPRICE = 0x3a;
constexpr uint8_t EXTCODESIZE = 0x3b;
constexpr uint8_t EXTCODECOPY = 0x3c;
constexpr uint8_t RETURNDATASIZE = 0x3d;
constexpr uint8_t RETURNDATACOPY = 0x3e;
constexpr uint8_t EXTCODEHASH = 0x3f;
constexpr uint8_t BLOCKHASH = 0x40;
constexpr uint8_t TIMESTAMP = 0x42;
constexpr uint8_t NUMBER = 0x43;
constexpr uint8_t SELFBALANCE = 0x47;
constexpr uint8_t BLOBHASH = 0x49;
constexpr uint8_t POP = 0x50;
constexpr uint8_t MLOAD = 0x51;
constexpr uint8_t MSTORE = 0x52;
constexpr uint8_t MSTORE8 = 0x53;
constexpr uint8_t SLOAD = 0x54;
constexpr uint8_t SSTORE = 0x55;
constexpr uint8_t JUMP = 0x56;
constexpr uint8_t JUMPI = 0x57;
constexpr uint8_t PC = 0x58;
constexpr uint8_t MSIZE = 0x59;
constexpr uint8_t GAS = 0x5a;
constexpr uint8_t JUMPDEST = 0x5b;
constexpr uint8_t TLOAD = 0x5c;
constexpr uint8_t TSTORE = 0x5d;
constexpr uint8_t MCOPY = 0x5e;
constexpr uint8_t PUSH0 = 0x5f;
constexpr uint8_t PUSH1 = 0x60;
constexpr uint8_t PUSH2 = 0x61;
constexpr uint8_t PUSH4 = 0x63;
constexpr uint8_t PUSH20 = 0x73;
constexpr uint8_t PUSH32 = 0x7f;
constexpr uint8_t DUP1 = 0x80;
constexpr uint8_t DUP16 = 0x8f;
constexpr uint8_t SWAP1 = 0x90;
constexpr uint8_t SWAP16 = 0x9f;
constexpr uint8_t LOG0 = 0xa0;
constexpr uint8_t LOG4 = 0xa4;
constexpr uint8_t CREATE = 0xf0;
constexpr uint8_t CALL = 0xf1;
constexpr uint8_t CALLCODE = 0xf2;
constexpr uint8_t RETURN = 0xf3;
constexpr uint8_t DELEGATECALL = 0xf4;
constexpr uint8_t CREATE2 = 0xf5;
constexpr uint8_t STATICCALL = 0xfa;
constexpr uint8_t REVERT = 0xfd;
constexpr uint8_t INVALID = 0xfe;
constexpr uint8_t SELFDESTRUCT = 0xff;

inline bool is_push(uint8_t o) { return o >= PUSH1 && o <= PUSH32; }
inline bool is_dup(uint8_t o) { return o >= DUP1 && o <= DUP16; }
inline bool is_swap(uint8_t o) { return o >= SWAP1 && o <= SWAP16; }
inline bool is_log(uint8_t o) { return o >= LOG0 && o <= LOG4; }
}  // namespace op

enum class CodeOrigin { HexFile, HexString, RpcFetch };

struct RawCode {
  std::vector<uint8_t> bytes;
  CodeOrigin origin = CodeOrigin::HexString;
};

struct Instruction {
  uint32_t offset = 0;         // byte offset in the code it was decoded from
  uint8_t opcode = 0;
  Word immediate = 0;          // PUSH payload, zero-padded if truncated
  uint8_t immediate_size = 0;  // declared width, not the bytes present
  bool truncated = false;      // PUSH ran past end of code

  const OpcodeInfo& info() const { return opcode_info(opcode); }
  const char* name() const { return info().name; }
  uint32_t size() const { return 1u + info().immediate_bytes; }
  uint32_t next_offset() const { return offset + size(); }
};

enum class DecodeErrorKind { OddLength, NonHexCharacter };

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, size_t position);
  DecodeErrorKind kind() const { return kind_; }
  size_t position() const { return position_; }

 private:
  DecodeErrorKind kind_;
  size_t position_;
};

class EmptyRuntimeError : public std::runtime_error {
 public:
  EmptyRuntimeError() : std::runtime_error("constructor returns empty runtime code") {}
};

// Hex text to bytes. Accepts an optional 0x prefix and leading/trailing
// whitespace; anything else non-hex raises DecodeError with the index of
// the offending character in the trimmed input.
RawCode decode_hex(const std::string& text, CodeOrigin origin = CodeOrigin::HexString);

std::string encode_hex(const std::vector<uint8_t>& bytes);  // 0x prefix, lowercase

// Reads a file that holds either hex text or raw binary code.
RawCode load_code_file(const std::string& path);

struct RuntimeSplit {
  std::vector<uint8_t> runtime;
  bool had_constructor = false;
  std::vector<std::string> warnings;
};

// Splits deployment bytecode into constructor and runtime by locating a
// CODECOPY whose arguments fold to constants inside one block and that
// feeds the block's RETURN. Inputs without that shape are returned whole.
RuntimeSplit extract_runtime(const RawCode& code);

// Linear sweep over the whole byte range. Every byte lands in exactly one
// instruction; unknown opcodes decode as Invalid-class singletons.
std::vector<Instruction> disassemble(const std::vector<uint8_t>& code);

// Inverse of disassemble for round-trip checks. Truncated trailing PUSH
// immediates are re-emitted only up to the original code length.
std::vector<uint8_t> assemble(const std::vector<Instruction>& instructions,
                              size_t original_size);

std::string code_hash(const std::vector<uint8_t>& code);  // keccak256 hex

}  // namespace evmtaint
