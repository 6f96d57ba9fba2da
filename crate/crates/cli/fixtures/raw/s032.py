n = int(input())
a = list(map(int, input().split()))
c = 0
i = 0
while i < n:
    if a[i] % 2 == 0:
        c += 1
    i += 2
print(c)
