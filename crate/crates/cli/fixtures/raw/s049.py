n = int(input())
a = list(map(int, input().split()))
s = 0
out = []
for x in a:
    out.append(s)
    s += x
print(' '.join(out))
