#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedmint/bootstrap.hpp"
#include "fedmint/domain.hpp"
#include "fedmint/rng.hpp"

namespace fedmint {

/// A ranked list of counterparts, best first. Scores are expected rewards on
/// the device side and (known or predicted) accuracies on the server side.
struct PreferenceList {
    std::string owner;
    std::vector<std::string> ranking;
    std::map<std::string, double> score;

    [[nodiscard]] bool lists(const std::string& id) const;
    /// Position in ranking, or nullopt if absent.
    [[nodiscard]] std::optional<std::size_t> rank_of(const std::string& id) const;
};

/// Sorts by score descending with id ascending as tie-break.
PreferenceList make_preference_list(std::string owner, std::map<std::string, double> scores);

// ---------------------------------------------------------------------------
// Device side
// ---------------------------------------------------------------------------

struct DevicePreferenceInputs {
    /// Last-round global accuracy per server; servers missing here use prior.
    const std::map<ServerId, AccuracyFraction>* previous_global = nullptr;
    /// Accuracy used for a device without history (e.g. a bootstrap prediction).
    std::optional<AccuracyFraction> newcomer_estimate;
    AccuracyFraction prior{0.5};
};

/// Ranks data-type compatible servers by the reward the device expects to
/// earn from each.
PreferenceList build_device_preferences(const DeviceProfile& device,
                                        std::span<const ServerProfile> servers,
                                        const LatencyMatrix& latency,
                                        const DevicePreferenceInputs& inputs);

// ---------------------------------------------------------------------------
// Server side
// ---------------------------------------------------------------------------

enum class ScoreSource { History, Bootstrap, PriorRefused, PriorNoData, Random };

struct NewcomerScore {
    AccuracyFraction accuracy;
    ScoreSource source = ScoreSource::Bootstrap;
};

/// Supplies an accuracy for a device with no history.
class NewcomerScorer {
public:
    virtual ~NewcomerScorer() = default;
    virtual NewcomerScore score(const ServerId& requester, const DeviceProfile& newcomer) = 0;
};

/// Routes each newcomer through the bootstrapping server, falling back to the
/// prior when the budget is exhausted or no server holds data.
class BootstrapScorer final : public NewcomerScorer {
public:
    BootstrapScorer(BootstrapServer& bootstrap, std::vector<ServerProfile>& registry,
                    AccuracyFraction prior);
    NewcomerScore score(const ServerId& requester, const DeviceProfile& newcomer) override;

private:
    BootstrapServer& bootstrap_;
    std::vector<ServerProfile>& registry_;
    AccuracyFraction prior_;
};

/// Ablation scorer: uniform [0, 1] accuracy for every newcomer.
class RandomScorer final : public NewcomerScorer {
public:
    explicit RandomScorer(Rng& rng) : rng_(rng) {}
    NewcomerScore score(const ServerId& requester, const DeviceProfile& newcomer) override;

private:
    Rng& rng_;
};

struct ServerPreferenceResult {
    PreferenceList list;
    std::map<DeviceId, NewcomerScore> newcomer_scores;
    int inquiries = 0;  // answered by the bootstrapping server
    int refusals = 0;   // budget exhausted
    int no_data = 0;    // pooled dataset empty
};

/// Ranks data-type compatible devices by accuracy. Newcomers are scored by the
/// scorer; everyone else by their latest local accuracy.
ServerPreferenceResult build_server_preferences(const ServerProfile& server,
                                                std::span<const DeviceProfile> devices,
                                                NewcomerScorer& scorer);

}  // namespace fedmint
