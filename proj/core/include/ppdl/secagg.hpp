#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ppdl/field.hpp"
#include "ppdl/groups.hpp"
#include "ppdl/rng.hpp"

namespace ppdl {

// Fixed-point encoding of real parameters into a prime field.
struct FieldParams {
  std::uint64_t prime = kMersenne61;
  int frac_bits = 16;
  double clip = 64.0;

  // Checks primality and that sums of up to `max_group + 1` clipped values
  // cannot wrap: (max_group + 1) * clip * 2^frac_bits < prime / 2.
  void validate(std::size_t max_group = 16) const;
  double scale() const;

  friend bool operator==(const FieldParams&, const FieldParams&) = default;
};

// round(x * 2^f) with negatives encoded as prime - |v|. Values beyond
// +-clip are clipped first; `clipped` (if given) is incremented per clip.
FieldVector quantize(std::span<const double> x, const FieldParams& fp,
                     std::size_t* clipped = nullptr);
FieldElement quantize_one(double x, const FieldParams& fp,
                          std::size_t* clipped = nullptr);
// Inverse of quantize; elements above prime/2 decode as negative.
std::vector<double> dequantize(std::span<const FieldElement> v,
                               const FieldParams& fp);

struct ShamirShare {
  FieldElement eval_point = 0;
  FieldVector value;
};

// Coordinate-wise degree-(t-1) polynomials with the secret as constant
// term; share k is the evaluation at point k (k = 1..n).
std::vector<ShamirShare> share_secret(std::span<const FieldElement> secret,
                                      std::size_t n, std::size_t t,
                                      const PrimeField& field, Rng& rng);

// Same as share_secret with explicit higher-order coefficients:
// coefficients[i] holds the x^(i+1) coefficient vector.
std::vector<ShamirShare> share_with_coefficients(
    std::span<const FieldElement> secret, std::size_t n,
    std::span<const FieldVector> coefficients, const PrimeField& field);

// Lagrange interpolation at zero from the first t shares. Throws
// ProtocolError on fewer than t shares or repeated evaluation points.
FieldVector reconstruct(std::span<const ShamirShare> shares, std::size_t t,
                        const PrimeField& field);

enum class MessageKind { mask_share, masked_upload, aggregate_share, reconstruction };

std::string_view to_string(MessageKind kind);

// One message crossing a node boundary during an aggregation.
struct Message {
  std::uint64_t round = 0;
  NodeId sender = 0;
  NodeId receiver = 0;
  MessageKind kind = MessageKind::mask_share;
  FieldVector payload;
};

struct Transcript {
  std::vector<Message> messages;

  // One line per message: round,sender,receiver,kind,payload-digest
  void write_audit_log(std::ostream& out) const;
};

// Number of messages whose payload equals any of `plaintexts` (the members'
// quantized parameter vectors). Zero means nothing was sent in the clear.
std::size_t audit_transcript(const Transcript& transcript,
                             std::span<const FieldVector> plaintexts);

struct AggregationOptions {
  std::uint64_t round = 0;
  // Shares needed to reconstruct; 0 means the full group size.
  std::size_t threshold = 0;
  // Members that go offline after distributing their mask shares.
  std::vector<NodeId> dropouts;
};

struct AggregateResult {
  std::vector<double> mean;          // dequantized mean over contributors
  FieldVector field_sum;             // sum of contributors' quantized vectors
  std::vector<NodeId> contributors;  // members whose upload was counted
  std::size_t clipped = 0;
  Transcript transcript;
};

using ParamsLookup = std::function<std::span<const double>(NodeId)>;

// Mask-and-share secure aggregation of the group's parameter vectors toward
// `aggregator`. Each member masks its quantized vector with a uniform field
// vector, Shamir-shares the mask among the group, and uploads only the
// masked vector. Surviving members send the sum of the mask shares they hold
// for surviving uploaders; the aggregator interpolates the mask sum and
// removes it. Throws AggregationFailure if fewer than `threshold` members
// survive.
AggregateResult secure_aggregate(NodeId aggregator, const Group& group,
                                 const ParamsLookup& params_of,
                                 const FieldParams& fp,
                                 const AggregationOptions& options, Rng& rng);

}  // namespace ppdl
