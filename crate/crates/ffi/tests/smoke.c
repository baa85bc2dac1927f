#include <stdio.h>
#include "modeswitch.h"

int main(void) {
    MsConfig *cfg = NULL;
    if (ms_config_from_toml("road_length = 100\n", &cfg) != MS_STATUS_OK) {
        fprintf(stderr, "%s\n", ms_last_error());
        return 1;
    }
    MsTrip *trip = NULL;
    if (ms_trip_new(cfg, 11, &trip) != MS_STATUS_OK) return 2;
    MsStep step;
    double total = 0.0;
    MsStatus s;
    while ((s = ms_trip_step(trip, &step)) == MS_STATUS_OK) total += step.utility;
    if (s != MS_STATUS_FINISHED) return 3;
    MsTripMetrics m;
    if (ms_trip_metrics(trip, &m) != MS_STATUS_OK) return 4;
    if (m.utility != total) return 5;
    if (ms_config_load("no-such-profile", &cfg) == MS_STATUS_OK || ms_last_error() == NULL) return 6;
    printf("schema %u intervals %llu utility %.6f\n", ms_schema_version(), (unsigned long long)m.intervals, m.utility);
    ms_trip_free(trip);
    ms_config_free(cfg);
    return 0;
}
