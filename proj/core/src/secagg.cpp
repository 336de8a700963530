#include "ppdl/secagg.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "ppdl/digest.hpp"
#include "ppdl/errors.hpp"

namespace ppdl {

void FieldParams::validate(std::size_t max_group) const {
  if (prime >= (std::uint64_t{1} << 63) || !is_prime(prime)) {
    throw ConfigError("secagg prime " + std::to_string(prime) +
                      " is not a prime below 2^63");
  }
  if (frac_bits < 0 || frac_bits > 52) {
    throw ConfigError("secagg frac_bits must lie in [0, 52]");
  }
  if (!(clip > 0.0) || !std::isfinite(clip)) {
    throw ConfigError("secagg clip must be positive");
  }
  const long double bound = static_cast<long double>(max_group + 1) * clip *
                            std::ldexp(1.0L, frac_bits);
  if (!(bound < static_cast<long double>(prime) / 2)) {
    throw ConfigError("secagg field too small: (M+1) * clip * 2^f >= prime/2");
  }
}

double FieldParams::scale() const { return std::ldexp(1.0, frac_bits); }

FieldElement quantize_one(double x, const FieldParams& fp, std::size_t* clipped) {
  if (std::isnan(x)) throw NumericalError("quantize: NaN parameter");
  if (x > fp.clip || x < -fp.clip) {
    x = std::clamp(x, -fp.clip, fp.clip);
    if (clipped) ++*clipped;
  }
  const long long v = std::llround(x * fp.scale());
  return v >= 0 ? static_cast<FieldElement>(v)
                : fp.prime - static_cast<FieldElement>(-v);
}

FieldVector quantize(std::span<const double> x, const FieldParams& fp,
                     std::size_t* clipped) {
  FieldVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = quantize_one(x[i], fp, clipped);
  return out;
}

std::vector<double> dequantize(std::span<const FieldElement> v,
                               const FieldParams& fp) {
  std::vector<double> out(v.size());
  const double inv_scale = 1.0 / fp.scale();
  const FieldElement half = fp.prime / 2;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const FieldElement e = v[i] % fp.prime;
    out[i] = e > half ? -static_cast<double>(fp.prime - e) * inv_scale
                      : static_cast<double>(e) * inv_scale;
  }
  return out;
}

std::vector<ShamirShare> share_with_coefficients(
    std::span<const FieldElement> secret, std::size_t n,
    std::span<const FieldVector> coefficients, const PrimeField& field) {
  const std::size_t t = coefficients.size() + 1;
  if (t > n) throw DomainError("share_secret: threshold exceeds share count");
  if (n >= field.prime()) throw DomainError("share_secret: too many holders for field");
  for (const auto& c : coefficients) {
    if (c.size() != secret.size()) {
      throw DomainError("share_secret: coefficient length mismatch");
    }
  }
  std::vector<ShamirShare> shares(n);
  for (std::size_t k = 0; k < n; ++k) {
    const FieldElement x = k + 1;
    ShamirShare& s = shares[k];
    s.eval_point = x;
    s.value.resize(secret.size());
    for (std::size_t i = 0; i < secret.size(); ++i) {
      // Horner from the highest coefficient down to the secret.
      FieldElement acc = 0;
      for (std::size_t c = coefficients.size(); c-- > 0;) {
        acc = field.add(field.mul(acc, x), coefficients[c][i]);
      }
      s.value[i] = field.add(field.mul(acc, x), field.reduce(secret[i]));
    }
  }
  return shares;
}

std::vector<ShamirShare> share_secret(std::span<const FieldElement> secret,
                                      std::size_t n, std::size_t t,
                                      const PrimeField& field, Rng& rng) {
  if (t == 0 || t > n) {
    throw DomainError("share_secret: need 1 <= t <= n (t=" + std::to_string(t) +
                      ", n=" + std::to_string(n) + ")");
  }
  std::uniform_int_distribution<FieldElement> uniform(0, field.prime() - 1);
  std::vector<FieldVector> coefficients(t - 1, FieldVector(secret.size()));
  for (auto& c : coefficients) {
    for (auto& e : c) e = uniform(rng);
  }
  return share_with_coefficients(secret, n, coefficients, field);
}

FieldVector reconstruct(std::span<const ShamirShare> shares, std::size_t t,
                        const PrimeField& field) {
  if (t == 0) throw DomainError("reconstruct: threshold must be positive");
  if (shares.size() < t) {
    throw ProtocolError("reconstruct: " + std::to_string(shares.size()) +
                        " shares, threshold " + std::to_string(t));
  }
  const auto used = shares.first(t);
  for (std::size_t a = 0; a < t; ++a) {
    if (used[a].eval_point % field.prime() == 0) {
      throw ProtocolError("reconstruct: evaluation point zero");
    }
    for (std::size_t b = a + 1; b < t; ++b) {
      if (used[a].eval_point == used[b].eval_point) {
        throw ProtocolError("reconstruct: duplicate evaluation point " +
                            std::to_string(used[a].eval_point));
      }
    }
    if (used[a].value.size() != used[0].value.size()) {
      throw ProtocolError("reconstruct: share length mismatch");
    }
  }
  // Lagrange basis at zero: L_a(0) = prod_{b != a} x_b / (x_b - x_a).
  std::vector<FieldElement> basis(t);
  for (std::size_t a = 0; a < t; ++a) {
    FieldElement num = 1;
    FieldElement den = 1;
    for (std::size_t b = 0; b < t; ++b) {
      if (a == b) continue;
      num = field.mul(num, used[b].eval_point);
      den = field.mul(den, field.sub(used[b].eval_point, used[a].eval_point));
    }
    basis[a] = field.mul(num, field.inv(den));
  }
  FieldVector secret(used[0].value.size(), 0);
  for (std::size_t a = 0; a < t; ++a) {
    for (std::size_t i = 0; i < secret.size(); ++i) {
      secret[i] = field.add(secret[i], field.mul(basis[a], used[a].value[i]));
    }
  }
  return secret;
}

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::mask_share: return "mask_share";
    case MessageKind::masked_upload: return "masked_upload";
    case MessageKind::aggregate_share: return "aggregate_share";
    case MessageKind::reconstruction: return "reconstruction";
  }
  return "unknown";
}

void Transcript::write_audit_log(std::ostream& out) const {
  for (const Message& m : messages) {
    Fnv1a h;
    for (FieldElement e : m.payload) h.update_u64(e);
    out << m.round << ',' << m.sender << ',' << m.receiver << ','
        << to_string(m.kind) << ',' << h.hex() << '\n';
  }
}

std::size_t audit_transcript(const Transcript& transcript,
                             std::span<const FieldVector> plaintexts) {
  std::size_t violations = 0;
  for (const Message& m : transcript.messages) {
    for (const FieldVector& p : plaintexts) {
      if (m.payload == p) {
        ++violations;
        break;
      }
    }
  }
  return violations;
}

AggregateResult secure_aggregate(NodeId aggregator, const Group& group,
                                 const ParamsLookup& params_of,
                                 const FieldParams& fp,
                                 const AggregationOptions& options, Rng& rng) {
  const std::size_t m = group.size();
  if (m == 0) throw DomainError("secure_aggregate: empty group");
  const std::size_t t = options.threshold == 0 ? m : options.threshold;
  if (t > m) {
    throw DomainError("secure_aggregate: threshold " + std::to_string(t) +
                      " exceeds group size " + std::to_string(m));
  }
  const PrimeField field(fp.prime);
  std::uniform_int_distribution<FieldElement> uniform(0, fp.prime - 1);

  AggregateResult result;
  Transcript& tr = result.transcript;

  // Phase 1: mask, share the mask, upload the masked vector.
  std::vector<FieldVector> uploads(m);
  std::vector<std::vector<ShamirShare>> mask_shares(m);
  std::size_t dim = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const NodeId member = group.members[j];
    const auto w = params_of(member);
    if (j == 0) {
      dim = w.size();
    } else if (w.size() != dim) {
      throw DomainError("secure_aggregate: members disagree on parameter length");
    }
    FieldVector q = quantize(w, fp, &result.clipped);
    FieldVector mask(dim);
    for (auto& e : mask) e = uniform(rng);
    mask_shares[j] = share_secret(mask, m, t, field, rng);
    for (std::size_t k = 0; k < m; ++k) {
      if (k == j) continue;
      tr.messages.push_back({options.round, member, group.members[k],
                             MessageKind::mask_share, mask_shares[j][k].value});
    }
    for (std::size_t i = 0; i < dim; ++i) q[i] = field.add(q[i], mask[i]);
    uploads[j] = std::move(q);
  }

  std::vector<bool> alive(m, true);
  for (NodeId d : options.dropouts) {
    auto it = std::find(group.members.begin(), group.members.end(), d);
    if (it != group.members.end()) alive[it - group.members.begin()] = false;
  }

  FieldVector masked_sum(dim, 0);
  for (std::size_t j = 0; j < m; ++j) {
    if (!alive[j]) continue;
    tr.messages.push_back({options.round, group.members[j], aggregator,
                           MessageKind::masked_upload, uploads[j]});
    field.add_assign(masked_sum, uploads[j]);
    result.contributors.push_back(group.members[j]);
  }
  if (result.contributors.size() < t) {
    throw AggregationFailure(
        "secure_aggregate: " + std::to_string(result.contributors.size()) +
        " of " + std::to_string(m) + " members survived, threshold " +
        std::to_string(t));
  }

  // Phase 2: each survivor k returns sum_j share_k(mask_j) over survivors j.
  std::vector<ShamirShare> summed;
  for (std::size_t k = 0; k < m; ++k) {
    if (!alive[k]) continue;
    ShamirShare s{static_cast<FieldElement>(k + 1), FieldVector(dim, 0)};
    for (std::size_t j = 0; j < m; ++j) {
      if (alive[j]) field.add_assign(s.value, mask_shares[j][k].value);
    }
    tr.messages.push_back({options.round, group.members[k], aggregator,
                           MessageKind::aggregate_share, s.value});
    summed.push_back(std::move(s));
  }

  const FieldVector mask_sum = reconstruct(summed, t, field);
  result.field_sum.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    result.field_sum[i] = field.sub(masked_sum[i], mask_sum[i]);
  }
  tr.messages.push_back({options.round, aggregator, aggregator,
                         MessageKind::reconstruction, result.field_sum});

  result.mean = dequantize(result.field_sum, fp);
  const double inv = 1.0 / static_cast<double>(result.contributors.size());
  for (double& v : result.mean) v *= inv;
  return result;
}

}  // namespace ppdl
