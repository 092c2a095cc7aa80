#ifndef BFDD_BFD_H
#define BFDD_BFD_H

#include <stdint.h>
#include <sys/types.h>

#include "bfdctl.h"

struct bfd_discrs {
	uint32_t my_discr;
	uint32_t remote_discr;
};

/* Mandatory section of a control packet, in network byte order. */
struct bfd_pkt {
	uint8_t diag;
	uint8_t flags;
	uint8_t detect_mult;
	uint8_t len;
	struct bfd_discrs discrs;
	uint32_t timers_desired_min_tx;
	uint32_t timers_required_min_rx;
	uint32_t timers_required_min_echo;
};

struct sockaddr_any {
	union {
		struct sockaddr_in sa_sin;
		struct sockaddr_in6 sa_sin6;
	};
};

typedef unsigned int ifindex_t;

struct bfd_global {
	int bg_shop;
	int bg_mhop;
	int bg_shop6;
	int bg_mhop6;
	void *bg_master;
	struct thread *bg_ev[4];
};

struct bfd_session;

extern struct bfd_global bglobal;

struct bfd_session *bfd_session_lookup(struct bfd_pkt *cp, struct sockaddr_any *peer, struct sockaddr_any *local, ifindex_t ifindex, int is_mhop);
void bfd_state_handle(struct bfd_session *bs, int nstate);
void cp_debug(int mhop, struct sockaddr_any *peer, struct sockaddr_any *local, ifindex_t ifindex, const char *fmt, ...);

#endif
