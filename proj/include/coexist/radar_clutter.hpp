// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef COEXIST_RADAR_CLUTTER_HPP
#define COEXIST_RADAR_CLUTTER_HPP

#include "coexist/numerics.hpp"
#include "coexist/rng.hpp"

#include <string>
#include <vector>

namespace coexist
{

// Packet timing of the uplink slot. Packet l occupies [l*T_pkt + T_CP, (l+1)*T_pkt]
// after the cyclic prefix; the radar fires at t = 0.
struct FrameTiming
{
    int N = 4096;          // subcarriers = samples per packet body
    int N_cp = 288;
    int N_pkt = 14;
    double Ts = 8.146e-9;  // sample time
    double tap_spacing = 0; // 1/W between clutter replicas; <= 0 means Ts

    double packet_duration() const { return (N + N_cp) * Ts; }
    double cp_duration() const { return N_cp * Ts; }
    double packet_start(int ell) const { return ell * packet_duration() + cp_duration(); }
    double packet_end(int ell) const { return (ell + 1) * packet_duration(); }
    double replica_spacing() const { return tap_spacing > 0 ? tap_spacing : Ts; }
};

struct RadarWaveform
{
    std::vector<cplx> code;     // unit total energy
    double pulse_duration = 8.146e-9;
    double transmit_power = 1.0;
    double prt = 1e-3;

    int length() const { return static_cast<int>(code.size()); }
    void validate() const;
};

// Random-phase polyphase code of length L, normalized to unit energy.
RadarWaveform random_phase_waveform(int L, double pulse_duration, double transmit_power, double prt, Rng &rng);

// JSON {"code": [[re, im], ...], "pulse_duration_s": ..., "transmit_power_w": ..., "prt_s": ...};
// the code is rescaled to unit energy on load.
RadarWaveform load_waveform(const std::string &path);

struct Scatterer
{
    double theta = 0.0;              // direction of arrival at the BS array, radians
    double delay = 0.0;              // seconds from radar transmission
    std::vector<double> variances;   // E|beta_{q,m}|^2 per replica m
};

struct ScattererEnsemble
{
    std::vector<Scatterer> scatterers;

    int size() const { return static_cast<int>(scatterers.size()); }
    int taps() const;
    void validate() const;
    double total_variance() const;
    ScattererEnsemble scaled(double factor) const;
};

struct EnsembleParams
{
    int count = 100;
    int taps = 256;
    double min_range_m = 1e3;
    double max_range_m = 150e3;
    double delay_legs = 2.0;      // tau = delay_legs * range / c
    double variance = 1.0;        // common sigma^2 before CNR calibration
    double min_theta = -kPi / 2;
    double max_theta = kPi / 2;
};

ScattererEnsemble random_ensemble(const EnsembleParams &params, Rng &rng);

// JSON {"scatterers": [{"theta": .., "delay_s": .., "variances": [..]}, ...]}
ScattererEnsemble load_ensemble(const std::string &path);
void save_ensemble(const ScattererEnsemble &ensemble, const std::string &path);

// Autocorrelation of the unit-energy rectangular pulse of duration Ts.
double pulse_autocorr(double tau, double Ts);

// Echo support [tau_q, tau_q + Q_c*Ts + L*Ts].
double echo_end(const Scatterer &s, int taps, int code_length, double Ts);

// Indices of scatterers whose echo interval meets the body of packet ell (closed intervals).
std::vector<int> scatterers_for_packet(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell,
                                       const FrameTiming &timing);

// Pre-FFT time samples sum_p c_p r_{q,p,m}(ell), length N.
CVector clutter_time_samples(int q, int ell, int m, const RadarWaveform &waveform, const ScattererEnsemble &ensemble,
                             const FrameTiming &timing);

// Isometric DFT of clutter_time_samples.
CVector clutter_signature(int q, int ell, int m, const RadarWaveform &waveform, const ScattererEnsemble &ensemble,
                          const FrameTiming &timing);

// Everything about the clutter of one packet: the active scatterers, their
// steering vectors and per-replica signatures, and per-subcarrier powers.
class PacketClutter
{
  public:
    PacketClutter() = default;
    PacketClutter(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell, const FrameTiming &timing,
                  int M, double spacing_ratio);

    int packet() const { return packet_; }
    int M() const { return static_cast<int>(steering_.rows()); }
    int N() const { return N_; }
    double transmit_power() const { return transmit_power_; }
    const std::vector<int> &scatterers() const { return active_; }
    int active_count() const { return static_cast<int>(active_.size()); }
    const CMatrix &steering() const { return steering_; }          // M x s
    const CMatrix &signatures(int i) const { return signatures_.at(i); } // N x Q_c for active scatterer i
    const std::vector<double> &variances(int i) const { return variances_.at(i); }
    // P_T * sum_m sigma^2_{q,m} |R_{q,l,m}^{(n)}|^2 for active scatterer i.
    double weight(int i, int n) const { return weights_(i, n); }
    const RMatrix &weights() const { return weights_; }

    // sum over active scatterers of weight(i, n): tr(K_C^{(n)}) / M.
    double per_antenna_power(int n) const;

    // K_{C(l)^{(n)}} as a factor B diag(sqrt(w^{(n)})).
    LowRankPsd covariance(int n) const;
    CMatrix covariance_dense(int n) const { return covariance(n).dense(); }

    // Realization of the M x N clutter matrix with fresh reflection coefficients.
    CMatrix draw(Rng &rng) const { return draw_columns(0, N_, rng); }
    // Subcarriers first .. first+count-1 only; same law as the matching columns of draw().
    CMatrix draw_columns(int first, int count, Rng &rng) const;

    // Multiply all reflection variances by factor.
    void scale(double factor);

  private:
    int packet_ = 0;
    int N_ = 0;
    double transmit_power_ = 1.0;
    std::vector<int> active_;
    CMatrix steering_;
    std::vector<CMatrix> signatures_;
    std::vector<std::vector<double>> variances_;
    RMatrix weights_;
};

std::vector<PacketClutter> build_slot_clutter(const ScattererEnsemble &ensemble, const RadarWaveform &waveform,
                                              const FrameTiming &timing, int M, double spacing_ratio);

CMatrix draw_clutter_matrix(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell,
                            const FrameTiming &timing, int M, double spacing_ratio, Rng &rng);

CMatrix clutter_cov_subcarrier(const ScattererEnsemble &ensemble, const RadarWaveform &waveform, int ell, int n,
                               const FrameTiming &timing, int M, double spacing_ratio);

// K_c(l)^{(q)}: (MC x MC) covariance of vec of the M x C sub-block of packet l's
// clutter over subcarriers qC .. qC+C-1 (column-major vec).
CMatrix training_block_covariance(const PacketClutter &packet, int q, int C);

// M x M covariance of C_q conj(P~): assembles blkdiag(K_c(0)^{(q)}, ..., K_c(T-1)^{(q)})
// and contracts with (I_M kron P~^H) through the vec(C_q)/vec(C_q^T) index remapping.
CMatrix training_clutter_cov(const std::vector<PacketClutter> &training_packets, int q, int C,
                             const CVector &pilot_normalized);

// Squared column norms of the factor below over ||b||^2, in its column order.
RVector training_clutter_weights(const std::vector<PacketClutter> &training_packets, int q, int C,
                                 const CVector &pilot_normalized);
// Same matrix in factored form: one column per (training packet, active scatterer).
LowRankPsd training_clutter_factor(const std::vector<PacketClutter> &training_packets, int q, int C,
                                   const CVector &pilot_normalized);

// Packet- and subcarrier-averaged per-antenna clutter power over the given packets.
double average_clutter_power(const std::vector<PacketClutter> &packets);

struct CnrCalibration
{
    double factor = 0.0;
    ScattererEnsemble ensemble;
};

// Scales all variances so that average_clutter_power over the slot equals sigma2_w * 10^(cnr/10).
CnrCalibration calibrate_cnr(const ScattererEnsemble &ensemble, const RadarWaveform &waveform,
                             const FrameTiming &timing, double target_cnr_db, double sigma2_w);
double cnr_scale_factor(double average_power, double target_cnr_db, double sigma2_w);

// Binary dump: "CXMAT1\0\0", uint64 rows, uint64 cols, row-major complex<double>, little-endian.
void write_matrix_dump(const std::string &path, const CMatrix &A);
CMatrix read_matrix_dump(const std::string &path);

} // namespace coexist

#endif
